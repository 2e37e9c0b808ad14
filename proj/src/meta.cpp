#include "adlift/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "adlift/errors.hpp"
#include "adlift/parallel.hpp"
#include "adlift/seeding.hpp"
#include "adlift/stats.hpp"

namespace adlift {

std::size_t FeatureTable::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

namespace {

void check_table(const FeatureTable& X) {
  if (X.names.size() != X.columns.size()) throw DataError("feature table: names/columns mismatch");
  for (const auto& c : X.columns) {
    if (c.size() != X.rows()) throw DataError("feature table: ragged columns");
  }
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& cols;
  std::span<const double> y;
  const ForestParams& p;
  std::mt19937_64 rng;
  Forest::Tree tree;
  std::vector<std::size_t> feature_pool;

  int build(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    const std::size_t n = end - begin;
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) sum += y[idx[k]];
    const double node_mean = sum / static_cast<double>(n);
    tree.nodes[static_cast<std::size_t>(node_id)].value = node_mean;

    bool constant = true;
    for (std::size_t k = begin + 1; k < end && constant; ++k) constant = y[idx[k]] == y[idx[begin]];
    if (n <= static_cast<std::size_t>(p.min_node) || n < 2 || constant ||
        (p.max_depth > 0 && depth >= p.max_depth)) {
      return node_id;
    }

    // Draw mtry candidate features without replacement.
    const std::size_t F = cols.size();
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(p.mtry), F);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (std::size_t k = 0; k < m; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, F - 1);
      std::swap(feature_pool[k], feature_pool[pick(rng)]);
    }
    std::vector<std::size_t> candidates(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates.begin(), candidates.end());

    const double base = sum * sum / static_cast<double>(n);
    double best_gain = 1e-12 * std::max(1.0, std::abs(base));
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                   idx.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t f : candidates) {
      const auto& x = cols[f];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left += y[order[k]];
        const double xa = x[order[k]], xb = x[order[k + 1]];
        if (xa == xb) continue;
        const double nl = static_cast<double>(k + 1), nr = static_cast<double>(n - k - 1);
        const double right = sum - left;
        const double gain = left * left / nl + right * right / nr - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (xa + xb);
          if (best_threshold == xb) best_threshold = xa;  // midpoint rounded up
        }
      }
    }
    if (best_feature < 0) return node_id;

    const auto& x = cols[static_cast<std::size_t>(best_feature)];
    auto mid_it = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                        idx.begin() + static_cast<std::ptrdiff_t>(end),
                                        [&](std::size_t r) { return x[r] <= best_threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
    const int left_id = build(idx, begin, mid, depth + 1);
    const int right_id = build(idx, mid, end, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }
};

double r2_score(std::span<const double> pred, std::span<const double> y) {
  double sy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(pred[i])) continue;
    sy += y[i];
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const double my = sy / static_cast<double>(n);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(pred[i])) continue;
    sse += (y[i] - pred[i]) * (y[i] - pred[i]);
    sst += (y[i] - my) * (y[i] - my);
  }
  if (sst == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - sse / sst;
}

}  // namespace

std::vector<std::vector<double>> Forest::canonical_columns(const FeatureTable& X) const {
  check_table(X);
  std::vector<std::vector<double>> cols;
  cols.reserve(names_.size());
  for (const auto& name : names_) cols.push_back(X.columns[X.index_of(name)]);
  return cols;
}

double Forest::predict_tree(const Tree& tree, const std::vector<std::vector<double>>& cols,
                            std::size_t row) {
  std::size_t k = 0;
  for (;;) {
    const auto& node = tree.nodes[k];
    if (node.feature < 0) return node.value;
    k = static_cast<std::size_t>(cols[static_cast<std::size_t>(node.feature)][row] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
}

std::vector<double> Forest::predict(const FeatureTable& X) const {
  const auto cols = canonical_columns(X);
  const std::size_t n = X.rows();
  std::vector<double> out(n, 0.0);
  for (const auto& tree : trees_) {
    for (std::size_t r = 0; r < n; ++r) out[r] += predict_tree(tree, cols, r);
  }
  for (auto& v : out) v /= static_cast<double>(trees_.size());
  return out;
}

std::vector<double> Forest::predict_oob(const FeatureTable& X) const {
  const auto cols = canonical_columns(X);
  const std::size_t n = X.rows();
  if (n != n_train_) throw DataError("out-of-bag prediction needs the training rows");
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& tree : trees_) {
    for (std::size_t r = 0; r < n; ++r) {
      if (tree.in_bag[r]) continue;
      sum[r] += predict_tree(tree, cols, r);
      ++count[r];
    }
  }
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[r] = count[r] ? sum[r] / static_cast<double>(count[r]) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double Forest::oob_r2(const FeatureTable& X, std::span<const double> y) const {
  if (y.size() != X.rows()) throw DataError("oob_r2: target length mismatch");
  return r2_score(predict_oob(X), y);
}

Forest fit_forest(const FeatureTable& X, std::span<const double> y, const ForestParams& p) {
  check_table(X);
  if (p.n_trees < 1 || p.mtry < 1 || p.min_node < 1 || p.max_depth < 0) {
    throw ConfigError("invalid ForestParams: n_trees, mtry, min_node must be >= 1");
  }
  const std::size_t n = X.rows();
  if (y.size() != n) throw DataError("fit_forest: target length mismatch");
  if (n < 20) throw DataError("fit_forest needs at least 20 records, got " + std::to_string(n));
  if (X.names.empty()) throw DataError("fit_forest needs at least one feature");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("fit_forest: undefined target value");
  }
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    throw DataError("fit_forest: constant target");
  }

  Forest forest;
  forest.names_ = X.names;
  std::sort(forest.names_.begin(), forest.names_.end());
  if (std::adjacent_find(forest.names_.begin(), forest.names_.end()) != forest.names_.end()) {
    throw DataError("fit_forest: duplicate feature names");
  }
  forest.n_train_ = n;
  const auto cols = forest.canonical_columns(X);
  forest.trees_.resize(static_cast<std::size_t>(p.n_trees));

  parallel_for(forest.trees_.size(), p.jobs, [&](std::size_t t) {
    TreeBuilder b{cols, y, p, std::mt19937_64(derive_seed(p.seed, t)), {}, std::vector<std::size_t>(cols.size())};
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> sample(n);
    b.tree.in_bag.assign(n, 0);
    for (auto& s : sample) {
      s = pick(b.rng);
      b.tree.in_bag[s] = 1;
    }
    b.build(sample, 0, n, 0);
    forest.trees_[t] = std::move(b.tree);
  });
  return forest;
}

ImportanceReport permutation_importance(const Forest& f, const FeatureTable& X,
                                        std::span<const double> y, std::uint64_t seed) {
  check_table(X);
  ImportanceReport rep;
  rep.baseline_r2 = f.oob_r2(X, y);
  rep.features = f.feature_names();
  for (const auto& name : rep.features) {
    FeatureTable permuted = X;
    auto& col = permuted.columns[permuted.index_of(name)];
    std::mt19937_64 rng(derive_seed(seed, name));
    std::shuffle(col.begin(), col.end(), rng);
    rep.raw_drop.push_back(rep.baseline_r2 - f.oob_r2(permuted, y));
  }
  const auto [lo, hi] = std::minmax_element(rep.raw_drop.begin(), rep.raw_drop.end());
  const double min = *lo, max = *hi;
  for (double d : rep.raw_drop) rep.scaled.push_back(max > min ? 100.0 * (d - min) / (max - min) : 0.0);
  return rep;
}

PartialDependence partial_dependence(const Forest& f, const FeatureTable& X,
                                     const std::string& feature, std::span<const double> grid) {
  if (grid.empty()) throw DataError("partial dependence needs a nonempty grid");
  check_table(X);
  PartialDependence pd;
  pd.feature = feature;
  const std::size_t j = X.index_of(feature);
  FeatureTable forced = X;
  for (double v : grid) {
    std::fill(forced.columns[j].begin(), forced.columns[j].end(), v);
    const auto pred = f.predict(forced);
    pd.curve.emplace_back(v, mean(pred));
  }
  std::vector<double> sorted = X.columns[j];
  std::sort(sorted.begin(), sorted.end());
  for (int q = 1; q <= 9; ++q) pd.rug.push_back(nearest_rank(sorted, q / 10.0));
  return pd;
}

std::vector<double> default_pdp_grid(const FeatureTable& X, const std::string& feature,
                                     std::size_t points) {
  std::vector<double> sorted = X.columns.at(X.index_of(feature));
  if (sorted.empty()) throw DataError("default_pdp_grid: empty column");
  std::sort(sorted.begin(), sorted.end());
  const double lo = nearest_rank(sorted, 0.02), hi = nearest_rank(sorted, 0.98);
  std::vector<double> grid;
  if (points <= 1 || lo == hi) return {lo};
  for (std::size_t k = 0; k < points; ++k) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  return grid;
}

}  // namespace adlift
