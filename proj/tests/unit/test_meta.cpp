#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "adlift/errors.hpp"
#include "adlift/meta.hpp"
#include "adlift/stats.hpp"

using namespace adlift;

namespace {

FeatureTable uniform_table(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureTable X;
  for (std::size_t j = 0; j < k; ++j) {
    X.names.push_back("x" + std::to_string(j + 1));
    std::vector<double> col(n);
    for (auto& v : col) v = u(rng);
    X.columns.push_back(std::move(col));
  }
  return X;
}

ForestParams params(int trees, std::uint64_t seed = 1) {
  ForestParams p;
  p.n_trees = trees;
  p.seed = seed;
  return p;
}

double ls_slope(const std::vector<std::pair<double, double>>& c) {
  double mx = 0, my = 0;
  for (const auto& [x, y] : c) {
    mx += x;
    my += y;
  }
  mx /= c.size();
  my /= c.size();
  double sxy = 0, sxx = 0;
  for (const auto& [x, y] : c) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("forest recovers a linear signal and finds none in noise") {
  const auto X = uniform_table(500, 3, 1);
  std::vector<double> y(500);
  for (std::size_t i = 0; i < 500; ++i) y[i] = 3.0 * X.columns[0][i];
  const auto f = fit_forest(X, y, params(300));
  CHECK(f.oob_r2(X, y) > 0.8);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::vector<double> noise(500);
  for (auto& v : noise) v = n01(rng);
  const auto g = fit_forest(X, noise, params(300));
  CHECK(g.oob_r2(X, noise) < 0.1);
}

TEST_CASE("forest is deterministic in its seed") {
  const auto X = uniform_table(120, 3, 3);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) y[i] = X.columns[1][i] + 0.1 * X.columns[2][i];
  const auto a = fit_forest(X, y, params(50, 9)).predict(X);
  const auto b = fit_forest(X, y, params(50, 9)).predict(X);
  CHECK(a == b);
  auto threaded = params(50, 9);
  threaded.jobs = 3;
  CHECK(fit_forest(X, y, threaded).predict(X) == a);
  CHECK(fit_forest(X, y, params(50, 10)).predict(X) != a);
}

TEST_CASE("forest is invariant to column order") {
  const auto X = uniform_table(150, 4, 5);
  std::vector<double> y(150);
  for (std::size_t i = 0; i < 150; ++i) y[i] = X.columns[0][i] * X.columns[3][i] + X.columns[2][i];
  FeatureTable Y;
  for (std::size_t j : {3u, 1u, 0u, 2u}) {
    Y.names.push_back(X.names[j]);
    Y.columns.push_back(X.columns[j]);
  }
  const auto fx = fit_forest(X, y, params(60, 4));
  const auto fy = fit_forest(Y, y, params(60, 4));
  CHECK(fx.predict(X) == fy.predict(Y));
  CHECK(fx.predict(Y) == fx.predict(X));
  CHECK(fx.oob_r2(X, y) == fy.oob_r2(Y, y));
  const auto ix = permutation_importance(fx, X, y, 8);
  const auto iy = permutation_importance(fy, Y, y, 8);
  CHECK(ix.features == iy.features);
  CHECK(ix.raw_drop == iy.raw_drop);
}

TEST_CASE("permutation importance: scaling, constant columns and null features") {
  auto X = uniform_table(300, 3, 6);
  X.names.push_back("flat");
  X.columns.push_back(std::vector<double>(300, 2.5));
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = 3.0 * X.columns[0][i];
  const auto f = fit_forest(X, y, params(200));
  const auto rep = permutation_importance(f, X, y, 3);
  REQUIRE(rep.features.size() == 4);
  const auto at = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(rep.features.begin(), rep.features.end(), name) - rep.features.begin());
  };
  CHECK(rep.raw_drop[at("flat")] == 0.0);
  CHECK(rep.scaled[at("x1")] == 100.0);
  CHECK(*std::min_element(rep.scaled.begin(), rep.scaled.end()) == 0.0);
  CHECK(rep.baseline_r2 == doctest::Approx(f.oob_r2(X, y)));
}

TEST_CASE("a null feature scores below 5 across repetitions") {
  std::vector<double> scores;
  for (std::uint64_t r = 0; r < 20; ++r) {
    // Two null features, so the larger score is not pinned to 0 by scaling.
    const auto X = uniform_table(200, 4, 100 + r);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = 2.0 * X.columns[0][i] + X.columns[1][i];
    const auto f = fit_forest(X, y, params(100, r + 1));
    const auto rep = permutation_importance(f, X, y, r);
    scores.push_back(std::max(rep.scaled[2], rep.scaled[3]));
  }
  CHECK(mean(scores) < 5.0);
}

TEST_CASE("partial dependence of an additive function") {
  const auto X = uniform_table(500, 2, 11);
  std::vector<double> y(500);
  for (std::size_t i = 0; i < 500; ++i) y[i] = 2.0 * X.columns[0][i] + X.columns[1][i];
  const auto f = fit_forest(X, y, params(200));
  const auto grid = default_pdp_grid(X, "x1");
  CHECK(grid.size() == 20);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  const auto pd = partial_dependence(f, X, "x1", grid);
  CHECK(pd.curve.size() == 20);
  CHECK(std::abs(ls_slope(pd.curve) / 2.0 - 1.0) < 0.2);
  CHECK(pd.rug.size() == 9);
  CHECK(std::is_sorted(pd.rug.begin(), pd.rug.end()));

  // A single grid point equals the direct forced-value average.
  const double v = 0.37;
  auto forced = X;
  std::fill(forced.columns[0].begin(), forced.columns[0].end(), v);
  const double direct = mean(f.predict(forced));
  const auto one = partial_dependence(f, X, "x1", std::vector<double>{v});
  CHECK(one.curve.front().second == doctest::Approx(direct).epsilon(1e-12));

  CHECK_THROWS_AS(partial_dependence(f, X, "x1", std::vector<double>{}), DataError);
  CHECK_THROWS_AS(partial_dependence(f, X, "nope", grid), DataError);
}

TEST_CASE("a feature no tree uses has a flat PDP") {
  auto X = uniform_table(100, 2, 13);
  X.names.push_back("unused");
  X.columns.push_back(std::vector<double>(100, 1.0));  // constant: never split on
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = X.columns[0][i] - X.columns[1][i];
  const auto f = fit_forest(X, y, params(40));
  const auto pd = partial_dependence(f, X, "unused", std::vector<double>{-5.0, 0.0, 1.0, 7.0});
  for (const auto& [g, val] : pd.curve) CHECK(val == pd.curve.front().second);
}

TEST_CASE("forest input errors") {
  const auto small = uniform_table(19, 2, 1);
  std::vector<double> y19(19);
  for (std::size_t i = 0; i < 19; ++i) y19[i] = static_cast<double>(i);
  CHECK_THROWS_AS(fit_forest(small, y19, params(10)), DataError);

  const auto X = uniform_table(40, 2, 1);
  CHECK_THROWS_AS(fit_forest(X, std::vector<double>(40, 1.0), params(10)), DataError);
  std::vector<double> y(40, 0.0);
  y[3] = std::nan("");
  CHECK_THROWS_AS(fit_forest(X, y, params(10)), DataError);

  std::vector<double> ok(40);
  for (std::size_t i = 0; i < 40; ++i) ok[i] = static_cast<double>(i);
  auto bad = params(10);
  bad.mtry = 0;
  CHECK_THROWS_AS(fit_forest(X, ok, bad), ConfigError);
  bad = params(10);
  bad.min_node = 0;
  CHECK_THROWS_AS(fit_forest(X, ok, bad), ConfigError);
}
