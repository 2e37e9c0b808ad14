#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "adlift/core_types.hpp"

namespace adlift {

// One simulated outcome event. Its untreated conversion probabilities are
// calibrated so their population mean equals `baseline_rate`; exposure
// multiplies them by (1 + true_lift).
struct SimEvent {
  std::string name;
  Funnel funnel = Funnel::kUpper;
  double baseline_rate = 0.02;
  double true_lift = 0.2;
};

// Parameters of a synthetic experiment with endogenous exposure.
//
// Dense features are standard normal. Exposure among test users follows a
// logistic index over all dense features, the sparse interest embedding and
// the action-rate feature; `selection_strength` scales the index and
// `exposure_noise` the logistic shock. The first round(confounding_overlap *
// dense_dim) dense features also drive outcomes (with the same weights they
// carry in selection), and the first round(hidden_fraction * dense_dim) are
// the ones withheld by observed_view().
struct SimConfig {
  std::string experiment_id = "sim";
  std::size_t n_users = 10'000;
  double planned_split = 0.5;
  std::size_t dense_dim = 8;
  int sparse_vocab = 20;
  double sparse_mean_active = 3.0;
  double selection_strength = 1.0;
  double confounding_overlap = 1.0;
  double hidden_fraction = 0.0;
  double true_lift = 0.2;
  double baseline_rate = 0.02;
  double exposure_noise = 1.0;
  double exposure_intercept = 0.0;
  double outcome_strength = 1.0;
  // Per-event overrides; empty means a single event "conversion" using
  // baseline_rate / true_lift.
  std::vector<SimEvent> events;
  int length_days = 28;
  std::string vertical = "retail";
  double prospecting_ratio = 0.5;
  std::uint64_t seed = 1;

  std::vector<SimEvent> resolved_events() const;
};

// Throws ConfigError on any out-of-range field.
void validate_sim_config(const SimConfig& cfg);

struct EventTruth {
  double true_att = 0.0;
  double true_lift = 0.0;
  double counterfactual_rate = 0.0;  // exposure-weighted mean of Y(0)
};

// Exact estimands computed from the generating probabilities: the ATT is
// sum_i e_i (p1_i - p0_i) / sum_i e_i over all simulated users, where e_i is
// the probability user i would be exposed if assigned to test.
struct GroundTruth {
  double true_att = 0.0;   // first event
  double true_lift = 0.0;  // first event
  double exposure_rate = 0.0;
  std::vector<std::size_t> hidden_feature_indices;
  std::map<std::string, EventTruth> events;
  // Latent exposure probability per user, in dataset row order.
  std::vector<double> exposure_prob;
  // Latent untreated conversion probability per user for the first event.
  std::vector<double> baseline_prob;
};

struct SimulatedExperiment {
  ExperimentDataset dataset;
  GroundTruth truth;
};

// Deterministic in cfg.seed. Throws ConfigError for infeasible configs.
SimulatedExperiment simulate_experiment(const SimConfig& cfg);

// Copy of `ds` with the hidden dense features removed.
ExperimentDataset observed_view(const ExperimentDataset& ds, const GroundTruth& gt);

// Latent exposure probabilities are clipped into this band.
inline constexpr double kMinExposureProb = 0.01;
inline constexpr double kMaxExposureProb = 0.99;

}  // namespace adlift
