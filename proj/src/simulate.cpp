#include "adlift/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adlift/errors.hpp"
#include "adlift/seeding.hpp"

namespace adlift {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kActionRateWeight = 1.0;
constexpr double kPriorOutcomeWeight = 0.4;
constexpr double kPriorOutcomeRate = 0.2;
constexpr double kSparseWeightSd = 0.3;

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Intercept a such that mean_i min(sigmoid(a + index_i), cap) == target.
double calibrate_intercept(const std::vector<double>& index, double cap, double target) {
  auto mean_at = [&](double a) {
    double s = 0.0;
    for (double v : index) s += std::min(sigmoid(a + v), cap);
    return s / static_cast<double>(index.size());
  };
  double lo = -40.0, hi = 40.0;
  if (mean_at(hi) < target) {
    throw ConfigError("infeasible simulation config: baseline rate " + std::to_string(target) +
                      " unreachable under the lift-implied probability cap");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mean_at(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<SimEvent> SimConfig::resolved_events() const {
  if (!events.empty()) return events;
  return {SimEvent{"conversion", Funnel::kUpper, baseline_rate, true_lift}};
}

void validate_sim_config(const SimConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid SimConfig: " + msg); };
  if (cfg.n_users < 2) fail("n_users must be at least 2");
  if (!(cfg.planned_split > 0.0 && cfg.planned_split < 1.0)) fail("planned_split must lie in (0,1)");
  if (cfg.sparse_vocab < 0) fail("sparse_vocab must be nonnegative");
  if (!(cfg.sparse_mean_active >= 0.0)) fail("sparse_mean_active must be nonnegative");
  if (cfg.sparse_vocab == 0 && cfg.sparse_mean_active > 0.0) {
    fail("sparse_mean_active > 0 requires sparse_vocab > 0");
  }
  if (!(cfg.selection_strength >= 0.0)) fail("selection_strength must be nonnegative");
  if (!(cfg.confounding_overlap >= 0.0 && cfg.confounding_overlap <= 1.0)) {
    fail("confounding_overlap must lie in [0,1]");
  }
  if (!(cfg.hidden_fraction >= 0.0 && cfg.hidden_fraction <= 1.0)) {
    fail("hidden_fraction must lie in [0,1]");
  }
  if (!(cfg.exposure_noise > 0.0)) fail("exposure_noise must be positive");
  if (!std::isfinite(cfg.exposure_intercept) || !std::isfinite(cfg.outcome_strength)) {
    fail("exposure_intercept and outcome_strength must be finite");
  }
  if (cfg.length_days < 1) fail("length_days must be positive");
  if (!(cfg.prospecting_ratio >= 0.0 && cfg.prospecting_ratio <= 1.0)) {
    fail("prospecting_ratio must lie in [0,1]");
  }
  std::vector<std::string> names;
  for (const auto& ev : cfg.resolved_events()) {
    if (ev.name.empty()) fail("event name must be nonempty");
    if (std::find(names.begin(), names.end(), ev.name) != names.end()) {
      fail("duplicate event '" + ev.name + "'");
    }
    names.push_back(ev.name);
    if (!(ev.baseline_rate > 0.0 && ev.baseline_rate < 1.0)) {
      fail("baseline_rate of '" + ev.name + "' must lie in (0,1)");
    }
    if (!(ev.true_lift > -1.0)) fail("true_lift of '" + ev.name + "' must exceed -1");
    if (ev.baseline_rate * (1.0 + ev.true_lift) > 1.0) {
      fail("baseline_rate * (1 + true_lift) of '" + ev.name + "' exceeds 1");
    }
  }
}

SimulatedExperiment simulate_experiment(const SimConfig& cfg) {
  validate_sim_config(cfg);
  const auto events = cfg.resolved_events();
  const std::size_t n = cfg.n_users;
  const std::size_t dim = cfg.dense_dim;
  const std::size_t n_overlap = fraction_count(cfg.confounding_overlap, dim);
  const std::size_t n_hidden = fraction_count(cfg.hidden_fraction, dim);

  // Fixed model weights.
  std::mt19937_64 wrng(derive_seed(cfg.seed, "weights"));
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::vector<double> beta(dim);
  for (auto& b : beta) b = std_normal(wrng);
  double beta_norm = 0.0, overlap_norm = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    beta_norm += beta[j] * beta[j];
    if (j < n_overlap) overlap_norm += beta[j] * beta[j];
  }
  beta_norm = std::sqrt(beta_norm);
  overlap_norm = std::sqrt(overlap_norm);
  std::vector<double> sparse_w(static_cast<std::size_t>(cfg.sparse_vocab));
  for (auto& w : sparse_w) w = kSparseWeightSd * std_normal(wrng);

  SimulatedExperiment out;
  auto& ds = out.dataset;
  auto& gt = out.truth;
  ds.meta.experiment_id = cfg.experiment_id;
  for (const auto& ev : events) ds.meta.outcome_events.push_back({ev.name, ev.funnel});
  ds.meta.planned_split = cfg.planned_split;
  ds.meta.length_days = cfg.length_days;
  ds.meta.vertical = cfg.vertical;
  ds.meta.prospecting_ratio = cfg.prospecting_ratio;
  for (std::size_t j = 0; j < dim; ++j) ds.schema.dense_names.push_back("x" + std::to_string(j));
  ds.schema.sparse_vocab = cfg.sparse_vocab;

  // Features, assignment and latent probabilities.
  std::mt19937_64 rng(derive_seed(cfg.seed, "users"));
  std::bernoulli_distribution assign(cfg.planned_split);
  std::bernoulli_distribution prior(kPriorOutcomeRate);
  std::poisson_distribution<int> n_active(cfg.sparse_mean_active > 0.0 ? cfg.sparse_mean_active
                                                                        : 1.0);
  std::uniform_int_distribution<int> vocab(0, std::max(0, cfg.sparse_vocab - 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ds.users.resize(n);
  gt.exposure_prob.resize(n);
  std::vector<double> outcome_index(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = ds.users[i];
    u.user_id = "u" + std::to_string(i);
    u.z = assign(rng) ? 1 : 0;
    u.dense.resize(dim);
    for (auto& x : u.dense) x = std_normal(rng);
    if (cfg.sparse_mean_active > 0.0) {
      int k = n_active(rng);
      for (int a = 0; a < k; ++a) u.sparse.push_back(vocab(rng));
      std::sort(u.sparse.begin(), u.sparse.end());
      u.sparse.erase(std::unique(u.sparse.begin(), u.sparse.end()), u.sparse.end());
    }
    u.action_rate = sigmoid(std_normal(rng));
    u.prior_outcome = prior(rng) ? 1 : 0;

    double sel = 0.0, out_dense = 0.0, sparse_sum = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      sel += beta[j] * u.dense[j];
      if (j < n_overlap) out_dense += beta[j] * u.dense[j];
    }
    if (beta_norm > 0.0) sel /= beta_norm;
    if (overlap_norm > 0.0) out_dense /= overlap_norm;
    for (int s : u.sparse) sparse_sum += sparse_w[static_cast<std::size_t>(s)];
    sel += sparse_sum + kActionRateWeight * (2.0 * u.action_rate - 1.0);

    const double lin = cfg.exposure_intercept + cfg.selection_strength * sel;
    gt.exposure_prob[i] =
        std::clamp(sigmoid(lin / cfg.exposure_noise), kMinExposureProb, kMaxExposureProb);
    outcome_index[i] = cfg.outcome_strength * (out_dense + cfg.confounding_overlap * sparse_sum) +
                       kPriorOutcomeWeight * u.prior_outcome;
  }

  // Untreated and treated conversion probabilities per event.
  std::vector<std::vector<double>> p0(events.size()), p1(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto& ev = events[e];
    const double cap = std::min(0.999, 0.999 / (1.0 + std::max(0.0, ev.true_lift)));
    const double a0 = calibrate_intercept(outcome_index, cap, ev.baseline_rate);
    p0[e].resize(n);
    p1[e].resize(n);
    double num = 0.0, den = 0.0, cf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p0[e][i] = std::min(sigmoid(a0 + outcome_index[i]), cap);
      p1[e][i] = p0[e][i] * (1.0 + ev.true_lift);
      const double ei = gt.exposure_prob[i];
      num += ei * (p1[e][i] - p0[e][i]);
      cf += ei * p0[e][i];
      den += ei;
    }
    EventTruth t;
    t.true_att = num / den;
    t.counterfactual_rate = cf / den;
    t.true_lift = t.true_att / t.counterfactual_rate;
    gt.events[ev.name] = t;
  }

  // Exposure and outcomes.
  double e_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = ds.users[i];
    const double ei = gt.exposure_prob[i];
    e_sum += ei;
    const bool exposed = unif(rng) < ei;
    u.w = (u.z == 1 && exposed) ? 1 : 0;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double p = u.w ? p1[e][i] : p0[e][i];
      u.y[events[e].name] = unif(rng) < p ? 1 : 0;
    }
  }

  gt.exposure_rate = e_sum / static_cast<double>(n);
  const auto& first = gt.events.at(events.front().name);
  gt.true_att = first.true_att;
  gt.true_lift = first.true_lift;
  gt.baseline_prob = std::move(p0.front());
  for (std::size_t j = 0; j < n_hidden; ++j) gt.hidden_feature_indices.push_back(j);
  return out;
}

ExperimentDataset observed_view(const ExperimentDataset& ds, const GroundTruth& gt) {
  const std::size_t dim = ds.schema.dense_dim();
  std::vector<bool> hidden(dim, false);
  for (std::size_t j : gt.hidden_feature_indices) {
    if (j >= dim) {
      throw DataError("hidden feature index " + std::to_string(j) + " out of range for " +
                      std::to_string(dim) + " dense features");
    }
    hidden[j] = true;
  }
  ExperimentDataset out;
  out.meta = ds.meta;
  out.schema.sparse_vocab = ds.schema.sparse_vocab;
  for (std::size_t j = 0; j < dim; ++j) {
    if (!hidden[j]) out.schema.dense_names.push_back(ds.schema.dense_names[j]);
  }
  out.users.reserve(ds.users.size());
  for (const auto& u : ds.users) {
    UserRecord v = u;
    v.dense.clear();
    for (std::size_t j = 0; j < dim; ++j) {
      if (!hidden[j]) v.dense.push_back(u.dense[j]);
    }
    out.users.push_back(std::move(v));
  }
  return out;
}

}  // namespace adlift
