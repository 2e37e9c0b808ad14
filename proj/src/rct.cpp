#include "adlift/rct.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "adlift/errors.hpp"
#include "adlift/seeding.hpp"
#include "adlift/stats.hpp"

namespace adlift {

namespace {

struct GroupSums {
  std::size_t n_test = 0, n_control = 0;
  std::size_t exposed = 0;      // test users with w = 1
  std::size_t y_test = 0;       // conversions in test
  std::size_t y_control = 0;
  std::size_t y_exposed = 0;    // conversions among exposed test users
  std::size_t y_unexposed = 0;  // conversions among unexposed test users
};

GroupSums group_sums(const OutcomeColumns& c) {
  GroupSums s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.z[i]) {
      ++s.n_test;
      s.exposed += c.w[i];
      s.y_test += c.y[i];
      (c.w[i] ? s.y_exposed : s.y_unexposed) += c.y[i];
    } else {
      ++s.n_control;
      s.y_control += c.y[i];
    }
  }
  return s;
}

void require_groups(const GroupSums& s) {
  if (s.n_test == 0 || s.n_control == 0) {
    throw EstimationError("RCT analysis needs both test and control users");
  }
}

double ratio(std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); }

// Lift from test/control sums: att = itt / exposure_rate, treated rate is
// the exposed conversion rate.
std::optional<double> lift_from_sums(const GroupSums& s) {
  if (s.exposed == 0 || s.n_test == 0 || s.n_control == 0) return std::nullopt;
  const double itt = ratio(s.y_test, s.n_test) - ratio(s.y_control, s.n_control);
  const double att = itt / ratio(s.exposed, s.n_test);
  return lift_from_att(att, ratio(s.y_exposed, s.exposed));
}

}  // namespace

PointEstimate estimate_itt(const ExperimentDataset& ds, const std::string& event) {
  const auto s = group_sums(outcome_columns(ds, event));
  require_groups(s);
  const double p1 = ratio(s.y_test, s.n_test), p0 = ratio(s.y_control, s.n_control);
  return {p1 - p0, std::sqrt(p1 * (1 - p1) / static_cast<double>(s.n_test) +
                             p0 * (1 - p0) / static_cast<double>(s.n_control))};
}

PointEstimate estimate_att_2sls(const ExperimentDataset& ds, const std::string& event) {
  const auto c = outcome_columns(ds, event);
  const auto s = group_sums(c);
  require_groups(s);
  if (s.exposed == 0) throw EstimationError("weak/degenerate instrument: no exposed users");

  // Instruments Q = [1, z], regressors R = [1, w]; beta = (Q'R)^-1 Q'y.
  const double n = static_cast<double>(c.size());
  double sw = 0, sz = 0, szw = 0, sy = 0, szy = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    sw += c.w[i];
    sz += c.z[i];
    szw += c.z[i] * c.w[i];
    sy += c.y[i];
    szy += c.z[i] * c.y[i];
  }
  const double a = n, b = sw, cc = sz, d = szw;  // Q'R = [[a, b], [cc, d]]
  const double det = a * d - b * cc;
  if (std::abs(det) < 1e-12) throw EstimationError("weak/degenerate instrument: singular Z'W");
  const double i00 = d / det, i01 = -b / det, i10 = -cc / det, i11 = a / det;
  const double beta0 = i00 * sy + i01 * szy;
  const double beta1 = i10 * sy + i11 * szy;

  // Meat: sum u^2 q q'.
  double m00 = 0, m01 = 0, m11 = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double u = c.y[i] - beta0 - beta1 * c.w[i];
    const double u2 = u * u;
    m00 += u2;
    m01 += u2 * c.z[i];
    m11 += u2 * c.z[i];
  }
  // V = (Q'R)^-1 M (Q'R)^-T; we need V[1][1] = row1 . M . row1.
  const double r0 = i10, r1 = i11;
  const double v11 = r0 * r0 * m00 + 2 * r0 * r1 * m01 + r1 * r1 * m11;
  return {beta1, std::sqrt(std::max(0.0, v11))};
}

std::optional<double> lift_from_att(double att, double treated_rate) {
  const double denom = treated_rate - att;
  if (!(denom > 0.0)) return std::nullopt;
  return att / denom;
}

BootstrapLift bootstrap_lift(const ExperimentDataset& ds, const std::string& event,
                             std::size_t replicates, std::uint64_t seed) {
  if (replicates < 50) throw ConfigError("bootstrap needs at least 50 replicates");
  const auto c = outcome_columns(ds, event);
  // Per-user category in the test group: 0 = unexposed non-converter,
  // 1 = unexposed converter, 2 = exposed non-converter, 3 = exposed converter.
  std::vector<std::uint8_t> test_cat, control_y;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.z[i]) {
      test_cat.push_back(static_cast<std::uint8_t>(2 * c.w[i] + c.y[i]));
    } else {
      control_y.push_back(c.y[i]);
    }
  }
  if (test_cat.empty() || control_y.empty()) {
    throw EstimationError("bootstrap needs both test and control users");
  }

  std::vector<double> lifts;
  lifts.reserve(replicates);
  BootstrapLift out;
  out.replicates = replicates;
  for (std::size_t b = 0; b < replicates; ++b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    std::uniform_int_distribution<std::size_t> pick_t(0, test_cat.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_c(0, control_y.size() - 1);
    GroupSums s;
    s.n_test = test_cat.size();
    s.n_control = control_y.size();
    for (std::size_t k = 0; k < test_cat.size(); ++k) {
      const auto cat = test_cat[pick_t(rng)];
      const bool w = cat >= 2, y = cat & 1;
      s.exposed += w;
      s.y_test += y;
      if (w) s.y_exposed += y;
    }
    for (std::size_t k = 0; k < control_y.size(); ++k) s.y_control += control_y[pick_c(rng)];
    if (auto l = lift_from_sums(s)) {
      lifts.push_back(*l);
    } else {
      ++out.dropped;
    }
  }
  out.unreliable = static_cast<double>(out.dropped) > 0.2 * static_cast<double>(replicates);
  if (lifts.empty()) return out;
  out.lift_se = sample_sd(lifts);
  std::sort(lifts.begin(), lifts.end());
  out.ci = std::make_pair(nearest_rank(lifts, 0.025), nearest_rank(lifts, 0.975));
  return out;
}

std::optional<double> delta_method_lift_se(const ExperimentDataset& ds, const std::string& event) {
  // lift = a / (yc - b) - 1 with a = mean(W*Y), b = mean((1-W)*Y) over test
  // users and yc the control conversion rate.
  const auto s = group_sums(outcome_columns(ds, event));
  require_groups(s);
  const double nt = static_cast<double>(s.n_test), nc = static_cast<double>(s.n_control);
  const double a = s.y_exposed / nt, b = s.y_unexposed / nt, yc = s.y_control / nc;
  const double D = yc - b;
  if (!(D > 0.0) || s.exposed == 0) return std::nullopt;
  const double var_a = a * (1 - a) / nt, var_b = b * (1 - b) / nt, cov_ab = -a * b / nt;
  const double var_c = yc * (1 - yc) / nc;
  const double ga = 1.0 / D, gb = a / (D * D), gc = -a / (D * D);
  const double var = ga * ga * var_a + gb * gb * var_b + 2 * ga * gb * cov_ab + gc * gc * var_c;
  return std::sqrt(std::max(0.0, var));
}

bool detectable_lift_check(double lift_se, double target_lift) {
  if (lift_se < 0.0) throw std::invalid_argument("lift_se must be nonnegative");
  return lift_se <= target_lift / 1.96;
}

std::optional<double> cohens_d(const ExperimentDataset& ds, const std::string& event) {
  const auto s = group_sums(outcome_columns(ds, event));
  require_groups(s);
  const double n1 = static_cast<double>(s.n_test), n0 = static_cast<double>(s.n_control);
  if (n1 + n0 <= 2) return std::nullopt;
  const double p1 = s.y_test / n1, p0 = s.y_control / n0;
  // Sample variance of a 0/1 variable: n p (1-p) / (n - 1).
  const double ss1 = n1 * p1 * (1 - p1), ss0 = n0 * p0 * (1 - p0);
  const double pooled_var = (ss1 + ss0) / (n1 + n0 - 2);
  if (!(pooled_var > 0.0)) return std::nullopt;
  return (p1 - p0) / std::sqrt(pooled_var);
}

RctResult analyze_rct(const ExperimentDataset& ds, const std::string& event,
                      std::size_t replicates, std::uint64_t seed) {
  RctResult r;
  r.experiment_id = ds.meta.experiment_id;
  r.event = event;
  if (const auto* ev = ds.meta.find_event(event)) r.funnel = ev->funnel;

  const auto s = group_sums(outcome_columns(ds, event));
  require_groups(s);
  r.n_test = s.n_test;
  r.n_control = s.n_control;
  r.exposure_rate = ratio(s.exposed, s.n_test);
  r.control_rate = ratio(s.y_control, s.n_control);
  r.treated_rate = s.exposed ? ratio(s.y_exposed, s.exposed) : 0.0;

  const auto itt = estimate_itt(ds, event);
  r.itt = itt.value;
  r.itt_se = itt.se;
  const auto att = estimate_att_2sls(ds, event);
  r.att = att.value;
  r.att_se = att.se;
  r.lift = lift_from_att(r.att, r.treated_rate);
  r.lift_se_delta = delta_method_lift_se(ds, event);
  r.cohens_d = cohens_d(ds, event);

  const auto boot = bootstrap_lift(ds, event, replicates, seed);
  if (boot.replicates > boot.dropped) {
    r.lift_se = boot.lift_se;
    r.lift_ci = boot.ci;
  }
  r.lift_ci_unreliable = boot.unreliable;
  if (r.lift && r.lift_se) {
    r.significant_5pct = *r.lift_se > 0.0 ? std::abs(*r.lift / *r.lift_se) > kZ975 : *r.lift != 0.0;
  }
  return r;
}

}  // namespace adlift
