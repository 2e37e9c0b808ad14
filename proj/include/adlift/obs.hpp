#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adlift/core_types.hpp"
#include "adlift/models.hpp"

namespace adlift {

// Observational estimators below run on test-group users only (all z = 1);
// passing control users is a DataError.

// Naive comparison of exposed and unexposed conversion rates.
EffectEstimate exposed_unexposed(const ExperimentDataset& ds, const std::string& event);

// att / (exposed_rate - att); empty when the denominator is not positive.
std::optional<double> obs_lift(double att, double exposed_rate);

// Propensity-score strata over [0,1] with boundaries b_0 < ... < b_J. User i
// falls in stratum j when b_{j-1} < e_i <= b_j (0-based index j-1 here);
// e = 0 goes to the first stratum.
struct Stratification {
  std::vector<double> boundaries;
  std::vector<int> assignment;
  std::vector<std::size_t> n_treated;    // N_1j
  std::vector<std::size_t> n_untreated;  // N_0j
  std::vector<int> dropped_strata;       // N_1j > 0 but N_0j = 0
  std::vector<double> weights;           // N_1j / N_1 over kept strata, else 0
};

// Equal-width strata; J = 1 puts everyone in one stratum.
Stratification stratify(std::span<const double> e_hat, std::span<const std::uint8_t> w, int strata);

enum class SpsmVariance {
  kCorrected,  // sum_j (V0j + V1j) * w_j^2
  kLiteral,    // sum_j (V0j + V1j)^2 * w_j^2
};

struct SpsmResult {
  EffectEstimate estimate;
  Stratification strata;
};

inline constexpr int kDefaultStrata = 100;

// Stratified propensity score matching: within-stratum exposed-unexposed
// differences weighted by each kept stratum's share of treated users.
SpsmResult spsm_att(const ExperimentDataset& ds, const std::string& event,
                    std::span<const double> e_hat, int strata = kDefaultStrata,
                    SpsmVariance variance = SpsmVariance::kCorrected);

enum class DmlVariant {
  kG0,  // residualize against g(0, X) in both score terms
  kGw,  // residualize against g(W, X)
};

struct DmlComponents {
  std::vector<double> psi;    // per-user score at the fold estimate
  std::vector<double> tau_k;  // per-fold estimates
  double tau = 0.0;           // mean of tau_k
  double jacobian = 0.0;      // mean derivative of the score in tau
  double sigma2 = 0.0;
};

struct DmlResult {
  EffectEstimate estimate;
  DmlComponents components;
};

// Orthogonal-score ATT with cross-fitted nuisances. Within each fold the
// estimate solves sum psi = 0; the pooled estimate averages folds. The
// score is scaled by the treated share N1/N, so the Jacobian is -1.
DmlResult dml_att(const ExperimentDataset& ds, const std::string& event,
                  const CrossFitPredictions& cf, DmlVariant variant = DmlVariant::kG0);

// Resamples test-group users with replacement, keeping their cross-fitted
// predictions and folds fixed, and recomputes a method's lift. Returns the
// bootstrap SD of the lift over replicates where it is defined.
std::optional<double> bootstrap_obs_lift_se(const ExperimentDataset& ds, const std::string& event,
                                            Method method, const CrossFitPredictions* cf,
                                            std::size_t replicates, std::uint64_t seed,
                                            int strata = kDefaultStrata,
                                            DmlVariant variant = DmlVariant::kG0);

}  // namespace adlift
