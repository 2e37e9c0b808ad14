#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "adlift/core_types.hpp"

namespace adlift {

struct PointEstimate {
  double value = 0.0;
  double se = 0.0;
};

// Difference in mean outcome between test (z=1) and control (z=0), with the
// two-sample binomial standard error.
PointEstimate estimate_itt(const ExperimentDataset& ds, const std::string& event);

// Just-identified 2SLS of Y on [1, W] instrumented by [1, Z], with an HC0
// sandwich standard error. Under one-sided noncompliance this equals
// itt / P(W=1 | Z=1).
PointEstimate estimate_att_2sls(const ExperimentDataset& ds, const std::string& event);

// att / (treated_rate - att); empty when the denominator is not positive.
std::optional<double> lift_from_att(double att, double treated_rate);

struct BootstrapLift {
  double lift_se = 0.0;
  std::optional<std::pair<double, double>> ci;  // 2.5 / 97.5 percentiles
  std::size_t replicates = 0;
  std::size_t dropped = 0;  // replicates with an undefined lift
  bool unreliable = false;  // more than 20% dropped
};

inline constexpr std::size_t kDefaultBootstrapReplicates = 200;

// Resamples users with replacement within each assignment group and
// recomputes the lift. Deterministic in `seed`.
BootstrapLift bootstrap_lift(const ExperimentDataset& ds, const std::string& event,
                             std::size_t replicates, std::uint64_t seed);

// Delta-method standard error of the RCT lift, a closed-form cross-check on
// the bootstrap. Empty when the lift is undefined.
std::optional<double> delta_method_lift_se(const ExperimentDataset& ds, const std::string& event);

// True when a lift of `target_lift` is detectable with 50% power at the 5%
// level, i.e. lift_se <= target_lift / 1.96.
bool detectable_lift_check(double lift_se, double target_lift);

// ITT divided by the pooled standard deviation of Y; empty when that is 0.
std::optional<double> cohens_d(const ExperimentDataset& ds, const std::string& event);

struct RctResult {
  std::string experiment_id;
  std::string event;
  Funnel funnel = Funnel::kUpper;
  double itt = 0.0;
  double itt_se = 0.0;
  double att = 0.0;
  double att_se = 0.0;
  std::optional<double> lift;
  std::optional<double> lift_se;  // bootstrap
  std::optional<std::pair<double, double>> lift_ci;
  bool lift_ci_unreliable = false;
  std::optional<double> lift_se_delta;
  double exposure_rate = 0.0;
  double treated_rate = 0.0;  // mean Y among exposed test users
  double control_rate = 0.0;
  std::size_t n_test = 0;
  std::size_t n_control = 0;
  std::optional<double> cohens_d;
  bool significant_5pct = false;
};

RctResult analyze_rct(const ExperimentDataset& ds, const std::string& event,
                      std::size_t replicates, std::uint64_t seed);

}  // namespace adlift
