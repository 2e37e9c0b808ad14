#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "adlift/errors.hpp"
#include "adlift/obs.hpp"
#include "adlift/rct.hpp"
#include "adlift/seeding.hpp"
#include "adlift/simulate.hpp"
#include "adlift/stats.hpp"

using namespace adlift;
using testutil::add;
using testutil::Row;
using testutil::rows_dataset;

namespace {

// Two explicit OLS stages: W on [1, Z], then Y on [1, W_hat].
double two_stage_ols(const std::vector<Row>& rows) {
  auto ols_slope = [](const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    const double b = (sxy - sx * sy / n) / (sxx - sx * sx / n);
    return std::pair{(sy - b * sx) / n, b};
  };
  std::vector<double> z, w, y;
  for (const auto& r : rows) {
    z.push_back(r.z);
    w.push_back(r.w);
    y.push_back(r.y);
  }
  const auto [a1, b1] = ols_slope(z, w);
  std::vector<double> what;
  for (double zi : z) what.push_back(a1 + b1 * zi);
  return ols_slope(what, y).second;
}

CrossFitPredictions manual_cf(std::vector<double> e, std::vector<double> g0, std::vector<double> g1,
                              std::vector<int> fold, int folds) {
  CrossFitPredictions cf;
  cf.folds = folds;
  cf.e_hat = std::move(e);
  cf.g0_hat = std::move(g0);
  cf.g1_hat = std::move(g1);
  cf.fold_of = std::move(fold);
  return cf;
}

std::vector<Row> random_rows(std::mt19937_64& rng, std::size_t n) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const int z = rng() % 2;
    const int w = z ? static_cast<int>(rng() % 2) : 0;
    rows.push_back({z, w, static_cast<int>(rng() % 3 == 0)});
  }
  // Guarantee every cell the estimators need.
  rows.push_back({1, 1, 1});
  rows.push_back({1, 1, 0});
  rows.push_back({1, 0, 1});
  rows.push_back({1, 0, 0});
  rows.push_back({0, 0, 1});
  rows.push_back({0, 0, 0});
  return rows;
}

}  // namespace

TEST_CASE("ITT is the difference of group means") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 1200);
  add(rows, 1, 0, 0, 98'800);
  add(rows, 0, 0, 1, 1000);
  add(rows, 0, 0, 0, 99'000);
  const auto ds = rows_dataset(rows);
  const auto itt = estimate_itt(ds, "conv");
  CHECK(itt.value == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(itt.se == doctest::Approx(std::sqrt(0.012 * 0.988 / 1e5 + 0.01 * 0.99 / 1e5)));

  std::vector<Row> same;
  add(same, 1, 1, 1, 3);
  add(same, 1, 0, 0, 7);
  add(same, 0, 0, 1, 3);
  add(same, 0, 0, 0, 7);
  CHECK(estimate_itt(rows_dataset(same), "conv").value == 0.0);

  std::vector<Row> only_test;
  add(only_test, 1, 1, 1, 3);
  CHECK_THROWS(estimate_itt(rows_dataset(only_test), "conv"));
}

TEST_CASE("2SLS matches explicit two-stage OLS and the Bloom identity on six rows") {
  const std::vector<Row> rows = {{1, 1, 1}, {1, 1, 0}, {1, 0, 1}, {1, 0, 0}, {0, 0, 1}, {0, 0, 0}};
  const auto ds = rows_dataset(rows);
  const auto att = estimate_att_2sls(ds, "conv");
  CHECK(att.value == doctest::Approx(two_stage_ols(rows)).epsilon(1e-12));
  const double itt = estimate_itt(ds, "conv").value;
  CHECK(att.value == doctest::Approx(itt / 0.5).epsilon(1e-12));

  const std::vector<Row> rows2 = {{1, 1, 1}, {1, 1, 1}, {1, 0, 0}, {0, 0, 0}, {0, 0, 1}, {0, 0, 0}};
  CHECK(estimate_att_2sls(rows_dataset(rows2), "conv").value ==
        doctest::Approx(two_stage_ols(rows2)).epsilon(1e-12));
}

TEST_CASE("ITT 0.002 with half exposure gives ATT 0.004") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 70);
  add(rows, 1, 1, 0, 4930);
  add(rows, 1, 0, 1, 50);
  add(rows, 1, 0, 0, 4950);
  add(rows, 0, 0, 1, 100);
  add(rows, 0, 0, 0, 9900);
  const auto ds = rows_dataset(rows);
  CHECK(estimate_itt(ds, "conv").value == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(estimate_att_2sls(ds, "conv").value == doctest::Approx(0.004).epsilon(1e-12));
}

TEST_CASE("full compliance makes ATT equal ITT") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 30);
  add(rows, 1, 1, 0, 70);
  add(rows, 0, 0, 1, 20);
  add(rows, 0, 0, 0, 80);
  const auto ds = rows_dataset(rows);
  CHECK(estimate_att_2sls(ds, "conv").value == doctest::Approx(estimate_itt(ds, "conv").value).epsilon(1e-14));
}

TEST_CASE("Bloom identity on random datasets") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 200; ++t) {
    const auto rows = random_rows(rng, 20 + rng() % 300);
    const auto ds = rows_dataset(rows);
    double nt = 0, nw = 0;
    for (const auto& r : rows) {
      nt += r.z;
      nw += r.w;
    }
    CHECK(std::abs(estimate_att_2sls(ds, "conv").value - estimate_itt(ds, "conv").value / (nw / nt)) < 1e-10);
  }
}

TEST_CASE("no exposed users is a degenerate instrument") {
  std::vector<Row> rows;
  add(rows, 1, 0, 1, 5);
  add(rows, 0, 0, 0, 5);
  CHECK_THROWS_WITH_AS(estimate_att_2sls(rows_dataset(rows), "conv"), doctest::Contains("degenerate instrument"),
                       EstimationError);
}

TEST_CASE("lift from ATT") {
  CHECK(*lift_from_att(0.01, 0.03) == doctest::Approx(0.5));
  CHECK(*lift_from_att(0.0, 0.03) == 0.0);
  CHECK_FALSE(lift_from_att(0.03, 0.03).has_value());
  CHECK_FALSE(lift_from_att(0.05, 0.03).has_value());
}

TEST_CASE("lift is unchanged when the sample is duplicated") {
  std::mt19937_64 rng(2);
  auto rows = random_rows(rng, 400);
  const auto ds1 = rows_dataset(rows);
  auto doubled = rows;
  doubled.insert(doubled.end(), rows.begin(), rows.end());
  const auto ds2 = rows_dataset(doubled);
  const auto r1 = analyze_rct(ds1, "conv", 50, 1), r2 = analyze_rct(ds2, "conv", 50, 1);
  REQUIRE(r1.lift.has_value());
  CHECK(*r2.lift == doctest::Approx(*r1.lift).epsilon(1e-12));
}

TEST_CASE("bootstrap lift") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 30);
  add(rows, 1, 0, 1, 30);
  add(rows, 0, 0, 1, 40);
  const auto flat = bootstrap_lift(rows_dataset(rows), "conv", 100, 5);
  CHECK(flat.lift_se == 0.0);
  CHECK(flat.dropped == 0);

  CHECK_THROWS_AS(bootstrap_lift(rows_dataset(rows), "conv", 49, 5), ConfigError);

  SimConfig cfg;
  cfg.n_users = 200'000;
  cfg.baseline_rate = 0.05;
  cfg.true_lift = 0.3;
  cfg.seed = 3;
  const auto ds = simulate_experiment(cfg).dataset;
  const auto a = bootstrap_lift(ds, "conversion", 200, 9);
  const auto b = bootstrap_lift(ds, "conversion", 200, 9);
  REQUIRE(a.ci.has_value());
  CHECK(a.ci == b.ci);
  CHECK(a.lift_se == b.lift_se);
  CHECK(a.ci->first < a.ci->second);
  const auto delta = delta_method_lift_se(ds, "conversion");
  REQUIRE(delta.has_value());
  CHECK(std::abs(a.lift_se / *delta - 1.0) < 0.25);
}

TEST_CASE("bootstrap flags a CI built from too few defined replicates") {
  // Treated conversions equal the ATT numerator in most resamples.
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 2);
  add(rows, 1, 1, 0, 1);
  add(rows, 1, 0, 0, 40);
  add(rows, 0, 0, 0, 40);
  const auto r = bootstrap_lift(rows_dataset(rows), "conv", 200, 1);
  CHECK(r.dropped > 40);
  CHECK(r.unreliable);
}

TEST_CASE("detectable lift check") {
  CHECK(detectable_lift_check(0.05, 0.10));
  CHECK_FALSE(detectable_lift_check(0.06, 0.10));
  CHECK(detectable_lift_check(0.0, 0.01));
}

TEST_CASE("Cohen's d") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 3);
  add(rows, 1, 0, 0, 2);
  add(rows, 0, 0, 1, 2);
  add(rows, 0, 0, 0, 3);
  // Sample variances 0.3 in each group; pooled SD sqrt(0.3).
  const double expected = 0.2 / std::sqrt((4 * 0.3 + 4 * 0.3) / 8);
  CHECK(*cohens_d(rows_dataset(rows), "conv") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.3651).epsilon(1e-3));

  std::vector<Row> same;
  add(same, 1, 1, 1, 2);
  add(same, 1, 0, 0, 2);
  add(same, 0, 0, 1, 2);
  add(same, 0, 0, 0, 2);
  CHECK(*cohens_d(rows_dataset(same), "conv") == 0.0);

  std::vector<Row> zeros;
  add(zeros, 1, 1, 0, 3);
  add(zeros, 0, 0, 0, 3);
  CHECK_FALSE(cohens_d(rows_dataset(zeros), "conv").has_value());
}

TEST_CASE("analyze_rct significance agrees with the bootstrap SE") {
  SimConfig cfg;
  cfg.n_users = 20'000;
  cfg.true_lift = 0.5;
  cfg.baseline_rate = 0.05;
  const auto r = analyze_rct(simulate_experiment(cfg).dataset, "conversion", 200, 1);
  REQUIRE(r.lift.has_value());
  REQUIRE(r.lift_se.has_value());
  CHECK(r.att == doctest::Approx(r.itt / r.exposure_rate).epsilon(1e-10));
  CHECK(r.significant_5pct == (std::abs(*r.lift / *r.lift_se) > kZ975));
  CHECK(r.lift_se_delta.has_value());
}

// Observational estimators.

TEST_CASE("exposed-unexposed examples") {
  std::vector<Row> rows;
  add(rows, 1, 1, 1, 4);
  add(rows, 1, 1, 0, 96);
  add(rows, 1, 0, 1, 1);
  add(rows, 1, 0, 0, 99);
  const auto e = exposed_unexposed(rows_dataset(rows), "conv");
  CHECK(e.att == doctest::Approx(0.03));
  CHECK(*e.lift == doctest::Approx(3.0));
  CHECK(e.se == doctest::Approx(std::sqrt(0.04 * 0.96 / 100 + 0.01 * 0.99 / 100)));

  std::vector<Row> same;
  add(same, 1, 1, 1, 2);
  add(same, 1, 1, 0, 8);
  add(same, 1, 0, 1, 2);
  add(same, 1, 0, 0, 8);
  const auto z = exposed_unexposed(rows_dataset(same), "conv");
  CHECK(z.att == 0.0);
  CHECK(*z.lift == 0.0);

  std::vector<Row> mixed = rows;
  mixed.push_back({0, 0, 0});
  CHECK_THROWS_AS(exposed_unexposed(rows_dataset(mixed), "conv"), DataError);
  std::vector<Row> one_class;
  add(one_class, 1, 1, 1, 3);
  CHECK_THROWS_AS(exposed_unexposed(rows_dataset(one_class), "conv"), EstimationError);
}

TEST_CASE("observational lift") {
  CHECK(*obs_lift(0.01, 0.03) == doctest::Approx(0.5));
  CHECK(*obs_lift(0.0, 0.03) == 0.0);
  CHECK_FALSE(obs_lift(0.03, 0.03).has_value());
  CHECK_FALSE(obs_lift(0.04, 0.03).has_value());
}

TEST_CASE("stratum boundaries are left-open and right-closed") {
  const std::vector<double> e = {0.0, 0.01, 0.010000001, 0.5, 0.99, 1.0};
  const std::vector<std::uint8_t> w = {1, 0, 1, 0, 1, 0};
  const auto s = stratify(e, w, 100);
  CHECK(s.assignment == std::vector<int>{0, 0, 1, 49, 98, 99});
  const auto one = stratify(e, w, 1);
  CHECK(one.assignment == std::vector<int>(6, 0));
}

TEST_CASE("SPSM hand example with two strata") {
  // Stratum A: treated {1, 1}, untreated {0, 0}; stratum B: treated {0},
  // untreated {0}.
  std::vector<Row> rows = {{1, 1, 1}, {1, 1, 1}, {1, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 0, 0}};
  const std::vector<double> e = {0.3, 0.3, 0.3, 0.3, 0.8, 0.8};
  const auto r = spsm_att(rows_dataset(rows), "conv", e, 2);
  CHECK(r.estimate.att == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r.strata.weights[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.strata.weights[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("SPSM variance in corrected and literal forms") {
  // Stratum 0: treated {1, 0}, untreated {1, 0, 0}; stratum 1: treated
  // {1, 1, 0}, untreated {0, 1}.
  std::vector<Row> rows = {{1, 1, 1}, {1, 1, 0}, {1, 0, 1}, {1, 0, 0}, {1, 0, 0},
                           {1, 1, 1}, {1, 1, 1}, {1, 1, 0}, {1, 0, 0}, {1, 0, 1}};
  const std::vector<double> e = {0.2, 0.2, 0.2, 0.2, 0.2, 0.7, 0.7, 0.7, 0.7, 0.7};
  auto V = [](double p, double n) { return p * (1 - p) / n; };  // (1/N) S^2 / N
  const double v0 = V(0.5, 2) + V(1.0 / 3, 3), v1 = V(2.0 / 3, 3) + V(0.5, 2);
  const double w0 = 0.4, w1 = 0.6;
  const auto c = spsm_att(rows_dataset(rows), "conv", e, 2, SpsmVariance::kCorrected);
  CHECK(c.estimate.att == doctest::Approx(w0 * (0.5 - 1.0 / 3) + w1 * (2.0 / 3 - 0.5)).epsilon(1e-14));
  CHECK(c.estimate.se == doctest::Approx(std::sqrt(v0 * w0 * w0 + v1 * w1 * w1)).epsilon(1e-14));
  const auto l = spsm_att(rows_dataset(rows), "conv", e, 2, SpsmVariance::kLiteral);
  CHECK(l.estimate.att == c.estimate.att);
  CHECK(l.estimate.se == doctest::Approx(std::sqrt(v0 * v0 * w0 * w0 + v1 * v1 * w1 * w1)).epsilon(1e-14));
}

TEST_CASE("SPSM drops treated-only strata and renormalizes") {
  std::vector<Row> rows = {{1, 1, 1}, {1, 0, 0}, {1, 1, 1}, {1, 1, 0}};
  const std::vector<double> e = {0.1, 0.1, 0.9, 0.9};
  const auto r = spsm_att(rows_dataset(rows), "conv", e, 2);
  CHECK(r.strata.dropped_strata == std::vector<int>{1});
  CHECK(r.strata.weights[0] == 1.0);
  CHECK(r.strata.weights[1] == 0.0);
  CHECK(r.estimate.att == 1.0);

  std::vector<Row> split = {{1, 1, 1}, {1, 0, 0}};
  CHECK_THROWS_AS(spsm_att(rows_dataset(split), "conv", std::vector<double>{0.9, 0.1}, 2), EstimationError);
}

TEST_CASE("single-stratum SPSM and trivial-nuisance DML reduce to exposed-unexposed") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 10 + rng() % 500;
    std::vector<Row> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({1, static_cast<int>(rng() % 2), static_cast<int>(rng() % 2)});
    rows.push_back({1, 1, 1});
    rows.push_back({1, 0, 0});
    const auto ds = rows_dataset(rows);
    std::vector<double> e(rows.size());
    for (auto& v : e) v = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const auto eu = exposed_unexposed(ds, "conv");
    const auto sp = spsm_att(ds, "conv", e, 1);
    CHECK(std::abs(sp.estimate.att - eu.att) < 1e-12);

    double n1 = 0;
    for (const auto& r : rows) n1 += r.w;
    const double share = n1 / static_cast<double>(rows.size());
    const auto cf = manual_cf(std::vector<double>(rows.size(), share), std::vector<double>(rows.size(), 0.0),
                              std::vector<double>(rows.size(), 0.0), std::vector<int>(rows.size(), 0), 1);
    CHECK(std::abs(dml_att(ds, "conv", cf).estimate.att - eu.att) < 1e-12);
  }
}

TEST_CASE("SPSM weights over kept strata sum to one") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 50 + rng() % 300;
    std::vector<double> e(n);
    std::vector<std::uint8_t> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      e[i] = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
      w[i] = std::bernoulli_distribution(e[i])(rng);
    }
    const auto s = stratify(e, w, 1 + static_cast<int>(rng() % 100));
    double sum = 0;
    for (double x : s.weights) sum += x;
    if (sum > 0) CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("DML hand example") {
  std::vector<Row> rows = {{1, 1, 1}, {1, 0, 0}};
  const auto cf = manual_cf({0.5, 0.5}, {0.3, 0.3}, {0.6, 0.6}, {0, 0}, 1);
  const auto r = dml_att(rows_dataset(rows), "conv", cf);
  CHECK(r.estimate.att == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.components.tau_k.size() == 1);
  CHECK(r.components.jacobian == doctest::Approx(-1.0));
}

TEST_CASE("DML pooled estimate is the mean of fold estimates") {
  std::mt19937_64 rng(9);
  const std::size_t n = 600;
  std::vector<Row> rows;
  std::vector<double> e(n), g0(n), g1(n);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({1, static_cast<int>(i % 3 == 0 || rng() % 4 == 0), static_cast<int>(rng() % 5 == 0)});
    e[i] = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    g0[i] = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
    g1[i] = g0[i] + 0.05;
    fold[i] = static_cast<int>(i % 3);
  }
  const auto ds = rows_dataset(rows);
  const auto cf = manual_cf(e, g0, g1, fold, 3);
  const auto r = dml_att(ds, "conv", cf);
  CHECK(r.components.tau == doctest::Approx(mean(r.components.tau_k)).epsilon(1e-14));
  // Independent evaluation of the fold solutions and the variance.
  std::vector<double> num(3), den(3);
  for (std::size_t i = 0; i < n; ++i) {
    const double res = rows[i].y - g0[i];
    const auto k = static_cast<std::size_t>(fold[i]);
    num[k] += rows[i].w ? res : -e[i] * res / (1 - e[i]);
    den[k] += rows[i].w;
  }
  double p = 0;
  for (const auto& row : rows) p += row.w;
  p /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(fold[i]);
    const double res = rows[i].y - g0[i];
    const double term = rows[i].w ? res - num[k] / den[k] : -e[i] * res / (1 - e[i]);
    ss += std::pow(term / p, 2);
  }
  for (int k = 0; k < 3; ++k) CHECK(r.components.tau_k[k] == doctest::Approx(num[k] / den[k]).epsilon(1e-13));
  CHECK(r.estimate.se == doctest::Approx(std::sqrt(ss / n / n)).epsilon(1e-12));

  // With g1 == g0 the two residual variants coincide.
  const auto same = manual_cf(e, g0, g0, fold, 3);
  CHECK(dml_att(ds, "conv", same, DmlVariant::kG0).estimate.att ==
        dml_att(ds, "conv", same, DmlVariant::kGw).estimate.att);
  CHECK(dml_att(ds, "conv", cf, DmlVariant::kG0).estimate.att !=
        dml_att(ds, "conv", cf, DmlVariant::kGw).estimate.att);
}

TEST_CASE("DML rejects a fold without treated users") {
  std::vector<Row> rows = {{1, 1, 1}, {1, 0, 0}, {1, 0, 1}};
  const auto cf = manual_cf({0.5, 0.5, 0.5}, {0, 0, 0}, {0, 0, 0}, {0, 1, 1}, 2);
  CHECK_THROWS_AS(dml_att(rows_dataset(rows), "conv", cf), EstimationError);
}

TEST_CASE("random exposure: exposed-unexposed is unbiased") {
  SimConfig cfg;
  cfg.selection_strength = 0.0;
  cfg.n_users = 10'000;
  cfg.baseline_rate = 0.05;
  cfg.true_lift = 0.4;
  std::vector<double> z;
  for (int r = 0; r < 60; ++r) {
    cfg.seed = derive_seed(404, static_cast<std::uint64_t>(r));
    const auto sim = simulate_experiment(cfg);
    const auto e = exposed_unexposed(test_group(sim.dataset), "conversion");
    z.push_back((e.att - sim.truth.true_att) / e.se);
  }
  CHECK(std::abs(mean(z)) < 3.0 / std::sqrt(60.0) * 1.2);
}

TEST_CASE("null effect: fitted DML is centered on zero") {
  SimConfig cfg;
  cfg.true_lift = 0.0;
  cfg.n_users = 8000;
  cfg.baseline_rate = 0.05;
  std::vector<double> z;
  for (int r = 0; r < 25; ++r) {
    cfg.seed = derive_seed(505, static_cast<std::uint64_t>(r));
    const auto tg = test_group(simulate_experiment(cfg).dataset);
    const auto cf = crossfit(ModelSpec{}, ModelSpec{}, tg, "conversion", 3, cfg.seed);
    const auto d = dml_att(tg, "conversion", cf);
    z.push_back(d.estimate.att / d.estimate.se);
  }
  CHECK(std::abs(mean(z)) < 3.0 / std::sqrt(25.0) * 1.3);
}

TEST_CASE("bootstrap of observational lifts is deterministic") {
  SimConfig cfg;
  cfg.n_users = 4000;
  cfg.baseline_rate = 0.08;
  const auto tg = test_group(simulate_experiment(cfg).dataset);
  const auto cf = crossfit(ModelSpec{}, ModelSpec{}, tg, "conversion", 3, 1);
  for (Method m : {Method::kExposedUnexposed, Method::kSpsm, Method::kDml}) {
    const auto a = bootstrap_obs_lift_se(tg, "conversion", m, &cf, 60, 3);
    const auto b = bootstrap_obs_lift_se(tg, "conversion", m, &cf, 60, 3);
    REQUIRE(a.has_value());
    CHECK(*a == *b);
    CHECK(*a > 0.0);
  }
}
