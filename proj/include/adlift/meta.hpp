#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adlift {

// Named numeric columns of equal length.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t index_of(const std::string& name) const;  // throws DataError
};

struct ForestParams {
  int n_trees = 500;
  int mtry = 2;
  int min_node = 1;
  int max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

// Bagged CART regression forest. Features are held in name order, so fits
// and predictions do not depend on the column order of the input table.
class Forest {
 public:
  const std::vector<std::string>& feature_names() const { return names_; }
  std::size_t n_trees() const { return trees_.size(); }
  std::size_t n_train() const { return n_train_; }

  // Mean prediction over all trees for each row of `X` (columns matched by
  // name; extra columns are ignored).
  std::vector<double> predict(const FeatureTable& X) const;

  // Out-of-bag prediction for each training row of `X`: the mean over trees
  // whose bootstrap sample missed that row. NaN if no such tree exists.
  std::vector<double> predict_oob(const FeatureTable& X) const;

  // R^2 of out-of-bag predictions over rows with at least one OOB tree.
  double oob_r2(const FeatureTable& X, std::span<const double> y) const;

  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<std::uint8_t> in_bag;  // per training row
  };

 private:
  friend Forest fit_forest(const FeatureTable& X, std::span<const double> y, const ForestParams& p);

  std::vector<std::vector<double>> canonical_columns(const FeatureTable& X) const;
  static double predict_tree(const Tree& tree, const std::vector<std::vector<double>>& cols,
                             std::size_t row);

  std::vector<std::string> names_;
  std::vector<Tree> trees_;
  std::size_t n_train_ = 0;
};

// Throws DataError for fewer than 20 rows, non-finite targets or a constant
// target, and ConfigError for invalid parameters.
Forest fit_forest(const FeatureTable& X, std::span<const double> y, const ForestParams& p);

struct ImportanceReport {
  double baseline_r2 = 0.0;
  std::vector<std::string> features;
  std::vector<double> raw_drop;  // baseline OOB R^2 minus permuted OOB R^2
  std::vector<double> scaled;    // linear map of raw_drop onto [0, 100]
};

// Permutation importance on out-of-bag predictions of the training rows.
ImportanceReport permutation_importance(const Forest& f, const FeatureTable& X,
                                        std::span<const double> y, std::uint64_t seed);

struct PartialDependence {
  std::string feature;
  std::vector<std::pair<double, double>> curve;  // (grid value, mean prediction)
  std::vector<double> rug;                       // observed 10%..90% deciles
};

PartialDependence partial_dependence(const Forest& f, const FeatureTable& X,
                                     const std::string& feature, std::span<const double> grid);

// `points` equally spaced values between the 2nd and 98th percentiles.
std::vector<double> default_pdp_grid(const FeatureTable& X, const std::string& feature,
                                     std::size_t points = 20);

}  // namespace adlift
