#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "adlift/core_types.hpp"

namespace adlift {

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  // Rows listed in `idx`, in that order.
  Matrix select_rows(std::span<const std::size_t> idx) const;
  // Copy with `col` appended as the last column.
  Matrix with_column(std::span<const double> col) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Model inputs: dense features, action rate, prior outcome, then a one-hot
// block for the sparse interest vocabulary.
Matrix feature_matrix(const ExperimentDataset& ds);
std::vector<std::string> feature_names(const FeatureSchema& schema);

enum class ModelKind { kLogistic, kMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  std::vector<int> hidden_layers = {32, 16};  // mlp only
  double learning_rate = 0.01;
  int epochs = 20;
  double l2 = 1e-4;
  int batch = 256;
  std::uint64_t seed = 0;
};

// Throws ConfigError.
void validate_model_spec(const ModelSpec& spec);

namespace detail {

struct LogisticParams {
  std::vector<double> weights;
  double bias = 0.0;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
};

struct MlpParams {
  std::vector<DenseLayer> layers;  // ReLU between layers, sigmoid on the last
};

}  // namespace detail

// A fitted binary classifier. Immutable after fit(); safe to share.
class Model {
 public:
  ModelKind kind() const;
  std::size_t input_dim() const { return mean_.size(); }

  // P(target = 1 | x), strictly inside (0,1).
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;

 private:
  friend Model fit(const ModelSpec& spec, const Matrix& X, std::span<const std::uint8_t> t);

  std::vector<double> mean_;
  std::vector<double> scale_;
  std::variant<detail::LogisticParams, detail::MlpParams> params_;
};

// Minimizes L2-regularized log-loss with mini-batch Adam on standardized
// inputs. Deterministic given spec.seed. Throws EstimationError
// ("degenerate target") when `t` has a single class.
Model fit(const ModelSpec& spec, const Matrix& X, std::span<const std::uint8_t> t);

// Probability that a random positive outscores a random negative, ties
// counted half. Throws EstimationError when a class is missing.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Propensity clipping band for cross-fitted scores.
inline constexpr double kPropensityFloor = 0.01;
inline constexpr double kPropensityCeil = 0.99;

// Out-of-fold nuisance predictions for the test group.
struct CrossFitPredictions {
  int folds = 0;
  std::vector<int> fold_of;
  std::vector<double> e_hat;   // clipped propensity
  std::vector<double> g0_hat;  // outcome model at w = 0
  std::vector<double> g1_hat;  // outcome model at w = 1
  std::vector<double> auc_propensity;
  std::vector<std::optional<double>> auc_outcome;  // empty when a fold lacks a class
  // Bookkeeping for the exclusivity audit: the folds and row count each
  // fold's models were trained on.
  std::vector<std::vector<int>> training_folds;
  std::vector<std::size_t> training_size;

  std::size_t size() const { return fold_of.size(); }
  double mean_auc_propensity() const;
  std::optional<double> mean_auc_outcome() const;
};

// K-fold cross-fitting of the propensity model (target W) and the outcome
// model (target Y with W appended as the last feature). `ds` must be
// test-group users only. Throws EstimationError when a fold lacks either
// exposure class.
CrossFitPredictions crossfit(const ModelSpec& spec_e, const ModelSpec& spec_g,
                             const ExperimentDataset& ds, const std::string& event, int folds,
                             std::uint64_t seed);

}  // namespace adlift
