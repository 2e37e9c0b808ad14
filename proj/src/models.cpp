#include "adlift/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adlift/errors.hpp"
#include "adlift/seeding.hpp"

namespace adlift {

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix Matrix::with_column(std::span<const double> col) const {
  if (col.size() != rows_) throw std::invalid_argument("with_column: length mismatch");
  Matrix out(rows_, cols_ + 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[cols_] = col[r];
  }
  return out;
}

Matrix feature_matrix(const ExperimentDataset& ds) {
  const std::size_t dim = ds.schema.dense_dim();
  const std::size_t vocab = static_cast<std::size_t>(std::max(0, ds.schema.sparse_vocab));
  Matrix X(ds.users.size(), dim + 2 + vocab);
  for (std::size_t i = 0; i < ds.users.size(); ++i) {
    const auto& u = ds.users[i];
    if (u.dense.size() != dim) throw DataError("ragged dense vector for '" + u.user_id + "'");
    auto r = X.row(i);
    std::copy(u.dense.begin(), u.dense.end(), r.begin());
    r[dim] = u.action_rate;
    r[dim + 1] = u.prior_outcome;
    for (int s : u.sparse) {
      if (s < 0 || static_cast<std::size_t>(s) >= vocab) {
        throw DataError("sparse index " + std::to_string(s) + " outside vocabulary");
      }
      r[dim + 2 + static_cast<std::size_t>(s)] = 1.0;
    }
  }
  return X;
}

std::vector<std::string> feature_names(const FeatureSchema& schema) {
  std::vector<std::string> names = schema.dense_names;
  names.push_back("action_rate");
  names.push_back("prior_outcome");
  for (int s = 0; s < schema.sparse_vocab; ++s) names.push_back("sparse_" + std::to_string(s));
  return names;
}

void validate_model_spec(const ModelSpec& spec) {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid ModelSpec: " + msg); };
  if (!(spec.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (spec.epochs < 1) fail("epochs must be at least 1");
  if (!(spec.l2 >= 0.0)) fail("l2 must be nonnegative");
  if (spec.batch < 1) fail("batch must be at least 1");
  if (spec.kind == ModelKind::kMlp) {
    for (int w : spec.hidden_layers) {
      if (w < 1) fail("hidden layer widths must be positive");
    }
  }
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kProbEps = 1e-9;

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// Flat parameter layout used during training. Logistic: [w..., b].
// MLP: per layer [W (out x in), b (out)].
struct Layout {
  std::vector<std::size_t> widths;  // input, hidden..., 1
  std::vector<std::size_t> offsets;

  std::size_t total() const { return offsets.back(); }
};

Layout make_layout(const ModelSpec& spec, std::size_t input_dim) {
  Layout lay;
  lay.widths.push_back(input_dim);
  if (spec.kind == ModelKind::kMlp) {
    for (int w : spec.hidden_layers) lay.widths.push_back(static_cast<std::size_t>(w));
  }
  lay.widths.push_back(1);
  lay.offsets.push_back(0);
  for (std::size_t l = 1; l < lay.widths.size(); ++l) {
    lay.offsets.push_back(lay.offsets.back() + lay.widths[l] * lay.widths[l - 1] + lay.widths[l]);
  }
  return lay;
}

// Forward pass over one standardized row. `acts[l]` holds post-activation
// values of layer l (acts[0] is the input). Returns the output logit.
double forward(const Layout& lay, const std::vector<double>& theta, std::span<const double> x,
               std::vector<std::vector<double>>& acts) {
  const std::size_t L = lay.widths.size() - 1;
  acts[0].assign(x.begin(), x.end());
  double logit = 0.0;
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t in = lay.widths[l - 1], out = lay.widths[l];
    const double* W = theta.data() + lay.offsets[l - 1];
    const double* b = W + out * in;
    auto& a = acts[l];
    a.resize(out);
    const auto& prev = acts[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* wr = W + o * in;
      for (std::size_t k = 0; k < in; ++k) s += wr[k] * prev[k];
      a[o] = (l == L) ? s : std::max(0.0, s);
    }
    if (l == L) logit = a[0];
  }
  return logit;
}

void backward(const Layout& lay, const std::vector<double>& theta,
              const std::vector<std::vector<double>>& acts, double dlogit,
              std::vector<double>& grad, std::vector<std::vector<double>>& deltas) {
  const std::size_t L = lay.widths.size() - 1;
  deltas[L].assign(1, dlogit);
  for (std::size_t l = L; l >= 1; --l) {
    const std::size_t in = lay.widths[l - 1], out = lay.widths[l];
    const double* W = theta.data() + lay.offsets[l - 1];
    double* gW = grad.data() + lay.offsets[l - 1];
    double* gb = gW + out * in;
    const auto& prev = acts[l - 1];
    const auto& d = deltas[l];
    for (std::size_t o = 0; o < out; ++o) {
      if (d[o] == 0.0) continue;
      double* gr = gW + o * in;
      for (std::size_t k = 0; k < in; ++k) gr[k] += d[o] * prev[k];
      gb[o] += d[o];
    }
    if (l == 1) break;
    auto& dp = deltas[l - 1];
    dp.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      if (d[o] == 0.0) continue;
      const double* wr = W + o * in;
      for (std::size_t k = 0; k < in; ++k) dp[k] += wr[k] * d[o];
    }
    for (std::size_t k = 0; k < in; ++k) {
      if (prev[k] <= 0.0) dp[k] = 0.0;  // ReLU
    }
  }
}

}  // namespace

ModelKind Model::kind() const {
  return std::holds_alternative<detail::LogisticParams>(params_) ? ModelKind::kLogistic
                                                                 : ModelKind::kMlp;
}

double Model::predict(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("predict: expected " + std::to_string(mean_.size()) +
                                " features, got " + std::to_string(x.size()));
  }
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean_[k]) / scale_[k];

  if (const auto* lp = std::get_if<detail::LogisticParams>(&params_)) {
    double s = lp->bias;
    for (std::size_t k = 0; k < z.size(); ++k) s += lp->weights[k] * z[k];
    return clamp_prob(sigmoid(s));
  }
  const auto& mlp = std::get<detail::MlpParams>(params_);
  std::vector<double> cur = std::move(z), next;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    next.assign(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = layer.bias[o];
      const double* wr = layer.weights.data() + o * layer.in;
      for (std::size_t k = 0; k < layer.in; ++k) s += wr[k] * cur[k];
      next[o] = (l + 1 == mlp.layers.size()) ? s : std::max(0.0, s);
    }
    std::swap(cur, next);
  }
  return clamp_prob(sigmoid(cur[0]));
}

std::vector<double> Model::predict(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

Model fit(const ModelSpec& spec, const Matrix& X, std::span<const std::uint8_t> t) {
  validate_model_spec(spec);
  const std::size_t n = X.rows(), d = X.cols();
  if (n != t.size()) throw std::invalid_argument("fit: X and targets differ in length");
  if (n < 2) throw EstimationError("fit: need at least 2 rows");
  std::size_t positives = 0;
  for (auto v : t) positives += v != 0;
  if (positives == 0 || positives == n) throw EstimationError("degenerate target");

  Model model;
  model.mean_.assign(d, 0.0);
  model.scale_.assign(d, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) model.mean_[c] += X(r, c);
  }
  for (auto& m : model.mean_) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = X(r, c) - model.mean_[c];
      var[c] += dv * dv;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(n));
    model.scale_[c] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix Z(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) Z(r, c) = (X(r, c) - model.mean_[c]) / model.scale_[c];
  }

  const Layout lay = make_layout(spec, d);
  const std::size_t L = lay.widths.size() - 1;
  std::mt19937_64 rng(derive_seed(spec.seed, "fit"));
  std::vector<double> theta(lay.total(), 0.0);
  // He initialization for hidden layers; the output layer starts at zero
  // weights with the bias at the base-rate logit.
  for (std::size_t l = 1; l < L; ++l) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(lay.widths[l - 1])));
    const std::size_t count = lay.widths[l] * lay.widths[l - 1];
    for (std::size_t k = 0; k < count; ++k) theta[lay.offsets[l - 1] + k] = init(rng);
  }
  if (L > 1) {
    std::normal_distribution<double> init(0.0, std::sqrt(1.0 / static_cast<double>(lay.widths[L - 1])));
    for (std::size_t k = 0; k < lay.widths[L - 1]; ++k) theta[lay.offsets[L - 1] + k] = init(rng);
  }
  const double base = static_cast<double>(positives) / static_cast<double>(n);
  theta[lay.total() - 1] = std::log(base / (1.0 - base));

  // Which flat entries are weights (penalized) rather than biases.
  std::vector<std::uint8_t> is_weight(lay.total(), 0);
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t count = lay.widths[l] * lay.widths[l - 1];
    std::fill_n(is_weight.begin() + static_cast<std::ptrdiff_t>(lay.offsets[l - 1]), count, 1);
  }

  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(spec.batch), n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * spec.epochs;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0), grad(theta.size());
  std::vector<std::vector<double>> acts(L + 1), deltas(L + 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t r = order[b];
        const double logit = forward(lay, theta, Z.row(r), acts);
        const double resid = sigmoid(logit) - (t[r] ? 1.0 : 0.0);
        backward(lay, theta, acts, resid, grad, deltas);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      // Linear decay to 10% of the base rate over the run.
      const double lr = spec.learning_rate * (1.0 - 0.9 * (static_cast<double>(step - 1) / total_steps));
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        double g = grad[k] * inv;
        if (is_weight[k]) g += spec.l2 * theta[k];
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g;
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g * g;
        theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
      }
    }
  }

  if (spec.kind == ModelKind::kLogistic) {
    detail::LogisticParams p;
    p.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
    p.bias = theta[d];
    model.params_ = std::move(p);
  } else {
    detail::MlpParams p;
    for (std::size_t l = 1; l <= L; ++l) {
      detail::DenseLayer layer;
      layer.in = lay.widths[l - 1];
      layer.out = lay.widths[l];
      auto begin = theta.begin() + static_cast<std::ptrdiff_t>(lay.offsets[l - 1]);
      auto mid = begin + static_cast<std::ptrdiff_t>(layer.in * layer.out);
      layer.weights.assign(begin, mid);
      layer.bias.assign(mid, mid + static_cast<std::ptrdiff_t>(layer.out));
      p.layers.push_back(std::move(layer));
    }
    model.params_ = std::move(p);
  }
  return model;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank sum of positives with midranks for ties (ranks doubled to stay integral).
  double rank2_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid2 = static_cast<double>(i + 1 + j);  // 2 * average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        rank2_pos += mid2;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw EstimationError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double u2 = rank2_pos - np * (np + 1.0);  // 2 * Mann-Whitney U
  return (0.5 * u2) / (np * static_cast<double>(n_neg));
}

double CrossFitPredictions::mean_auc_propensity() const {
  if (auc_propensity.empty()) return 0.5;
  return std::accumulate(auc_propensity.begin(), auc_propensity.end(), 0.0) /
         static_cast<double>(auc_propensity.size());
}

std::optional<double> CrossFitPredictions::mean_auc_outcome() const {
  double s = 0.0;
  int k = 0;
  for (const auto& a : auc_outcome) {
    if (a) {
      s += *a;
      ++k;
    }
  }
  if (k == 0) return std::nullopt;
  return s / k;
}

CrossFitPredictions crossfit(const ModelSpec& spec_e, const ModelSpec& spec_g,
                             const ExperimentDataset& ds, const std::string& event, int folds,
                             std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-fitting needs at least 2 folds");
  const auto cols = outcome_columns(ds, event);
  const std::size_t n = cols.size();
  for (auto z : cols.z) {
    if (z != 1) throw DataError("cross-fitting expects test-group users only");
  }
  const std::size_t K = static_cast<std::size_t>(folds);
  if (n < 2 * K) throw EstimationError("too few users for " + std::to_string(K) + " folds");

  CrossFitPredictions cf;
  cf.folds = folds;
  cf.fold_of.resize(n);
  {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, "folds"));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t p = 0; p < n; ++p) cf.fold_of[perm[p]] = static_cast<int>(p % K);
  }
  std::vector<std::vector<std::size_t>> members(K);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(cf.fold_of[i])].push_back(i);
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t exposed = 0;
    for (auto i : members[k]) exposed += cols.w[i];
    if (exposed == 0 || exposed == members[k].size()) {
      throw EstimationError("fold " + std::to_string(k) +
                            " lacks an exposure class; use more data or fewer folds");
    }
  }

  const Matrix X = feature_matrix(ds);
  std::vector<double> wcol(n);
  for (std::size_t i = 0; i < n; ++i) wcol[i] = cols.w[i];
  const Matrix XW = X.with_column(wcol);

  cf.e_hat.resize(n);
  cf.g0_hat.resize(n);
  cf.g1_hat.resize(n);
  cf.auc_propensity.resize(K);
  cf.auc_outcome.resize(K);
  cf.training_folds.resize(K);
  cf.training_size.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> train;
    train.reserve(n - members[k].size());
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(cf.fold_of[i]) != k) train.push_back(i);
    }
    for (std::size_t j = 0; j < K; ++j) {
      if (j != k) cf.training_folds[k].push_back(static_cast<int>(j));
    }
    cf.training_size[k] = train.size();
    std::vector<std::uint8_t> tw(train.size()), ty(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      tw[r] = cols.w[train[r]];
      ty[r] = cols.y[train[r]];
    }

    ModelSpec se = spec_e;
    se.seed = derive_seed(seed ^ spec_e.seed, "propensity/" + std::to_string(k));
    ModelSpec sg = spec_g;
    sg.seed = derive_seed(seed ^ spec_g.seed, "outcome/" + std::to_string(k));
    const Model prop = fit(se, X.select_rows(train), tw);
    const Model outcome = fit(sg, XW.select_rows(train), ty);

    const auto& held = members[k];
    std::vector<double> fold_e(held.size()), fold_g(held.size());
    std::vector<std::uint8_t> fold_w(held.size()), fold_y(held.size());
    std::vector<double> xw(X.cols() + 1);
    for (std::size_t r = 0; r < held.size(); ++r) {
      const std::size_t i = held[r];
      const double e = prop.predict(X.row(i));
      cf.e_hat[i] = std::clamp(e, kPropensityFloor, kPropensityCeil);
      auto xi = X.row(i);
      std::copy(xi.begin(), xi.end(), xw.begin());
      xw.back() = 0.0;
      cf.g0_hat[i] = outcome.predict(xw);
      xw.back() = 1.0;
      cf.g1_hat[i] = outcome.predict(xw);
      fold_e[r] = e;
      fold_g[r] = cols.w[i] ? cf.g1_hat[i] : cf.g0_hat[i];
      fold_w[r] = cols.w[i];
      fold_y[r] = cols.y[i];
    }
    cf.auc_propensity[k] = auc(fold_e, fold_w);
    const auto pos = static_cast<std::size_t>(std::count(fold_y.begin(), fold_y.end(), 1));
    if (pos > 0 && pos < fold_y.size()) cf.auc_outcome[k] = auc(fold_g, fold_y);
  }
  return cf;
}

}  // namespace adlift
