#include "adlift/obs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adlift/errors.hpp"
#include "adlift/seeding.hpp"
#include "adlift/stats.hpp"

namespace adlift {

namespace {

using Bytes = std::span<const std::uint8_t>;
using Reals = std::span<const double>;

OutcomeColumns test_columns(const ExperimentDataset& ds, const std::string& event) {
  auto c = outcome_columns(ds, event);
  for (auto z : c.z) {
    if (z != 1) throw DataError("observational estimators expect test-group users only");
  }
  return c;
}

struct ArmRates {
  std::size_t n1 = 0, n0 = 0;
  double r1 = 0.0, r0 = 0.0;
};

ArmRates arm_rates(Bytes w, Bytes y) {
  ArmRates a;
  double s1 = 0, s0 = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i]) {
      ++a.n1;
      s1 += y[i];
    } else {
      ++a.n0;
      s0 += y[i];
    }
  }
  if (a.n1) a.r1 = s1 / static_cast<double>(a.n1);
  if (a.n0) a.r0 = s0 / static_cast<double>(a.n0);
  return a;
}

// Delta-method SE of att / (r1 - att), treating att and the exposed rate r1
// as independent.
std::optional<double> obs_lift_se(double att, double se, double r1, std::size_t n1) {
  const double D = r1 - att;
  if (!(D > 0.0) || n1 == 0) return std::nullopt;
  const double var_r1 = r1 * (1 - r1) / static_cast<double>(n1);
  const double g_att = r1 / (D * D), g_r1 = -att / (D * D);
  return std::sqrt(g_att * g_att * se * se + g_r1 * g_r1 * var_r1);
}

EffectEstimate eu_core(Bytes w, Bytes y) {
  const auto a = arm_rates(w, y);
  if (a.n1 == 0 || a.n0 == 0) {
    throw EstimationError("exposed-unexposed comparison needs both exposure classes");
  }
  EffectEstimate est;
  est.method = Method::kExposedUnexposed;
  est.att = a.r1 - a.r0;
  const double v1 = a.r1 * (1 - a.r1) / static_cast<double>(a.n1);
  const double v0 = a.r0 * (1 - a.r0) / static_cast<double>(a.n0);
  est.se = std::sqrt(v1 + v0);
  est.lift = obs_lift(est.att, a.r1);
  if (est.lift) {
    // lift = r1 / r0 - 1
    est.lift_se = std::sqrt(v1 / (a.r0 * a.r0) + a.r1 * a.r1 * v0 / std::pow(a.r0, 4));
  }
  est.n_used = w.size();
  return est;
}

SpsmResult spsm_core(Reals e, Bytes w, Bytes y, int strata, SpsmVariance variance) {
  SpsmResult res;
  auto& st = res.strata;
  st = stratify(e, w, strata);
  const std::size_t J = static_cast<std::size_t>(strata);
  std::vector<double> sum1(J, 0.0), sum0(J, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto j = static_cast<std::size_t>(st.assignment[i]);
    (w[i] ? sum1 : sum0)[j] += y[i];
  }
  std::vector<double> mean1(J, 0.0), mean0(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    if (st.n_treated[j]) mean1[j] = sum1[j] / static_cast<double>(st.n_treated[j]);
    if (st.n_untreated[j]) mean0[j] = sum0[j] / static_cast<double>(st.n_untreated[j]);
  }
  // Within-stratum variances S^2 / N with the 1/N form of S^2.
  std::vector<double> ss1(J, 0.0), ss0(J, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto j = static_cast<std::size_t>(st.assignment[i]);
    if (w[i]) {
      ss1[j] += (y[i] - mean1[j]) * (y[i] - mean1[j]);
    } else {
      ss0[j] += (y[i] - mean0[j]) * (y[i] - mean0[j]);
    }
  }

  double att = 0.0, var = 0.0, treated_y = 0.0;
  std::size_t treated_kept = 0, used = 0;
  for (std::size_t j = 0; j < J; ++j) {
    if (st.weights[j] == 0.0) continue;
    const double n1 = static_cast<double>(st.n_treated[j]);
    const double n0 = static_cast<double>(st.n_untreated[j]);
    att += st.weights[j] * (mean1[j] - mean0[j]);
    const double v = (ss1[j] / n1) / n1 + (ss0[j] / n0) / n0;
    const double w2 = st.weights[j] * st.weights[j];
    var += (variance == SpsmVariance::kCorrected ? v : v * v) * w2;
    treated_y += sum1[j];
    treated_kept += st.n_treated[j];
    used += st.n_treated[j] + st.n_untreated[j];
  }
  if (treated_kept == 0) {
    throw EstimationError("SPSM: no stratum holds both treated and untreated users");
  }
  auto& est = res.estimate;
  est.method = Method::kSpsm;
  est.att = att;
  est.se = std::sqrt(var);
  const double r1 = treated_y / static_cast<double>(treated_kept);
  est.lift = obs_lift(att, r1);
  if (est.lift) est.lift_se = obs_lift_se(att, est.se, r1, treated_kept);
  est.n_used = used;
  return res;
}

DmlResult dml_core(Reals e, Bytes w, Bytes y, Reals g0, Reals g1, std::span<const int> fold,
                   int folds, DmlVariant variant) {
  const std::size_t n = w.size();
  const std::size_t K = static_cast<std::size_t>(folds);
  std::vector<double> resid_term(n);  // W(Y - g) - e (1-W)(Y - g) / (1 - e)
  std::vector<double> num(K, 0.0);
  std::vector<std::size_t> treated(K, 0);
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fold[i] < 0 || static_cast<std::size_t>(fold[i]) >= K) {
      throw DataError("fold index out of range in cross-fit predictions");
    }
    const double g = (variant == DmlVariant::kGw && w[i]) ? g1[i] : g0[i];
    const double r = y[i] - g;
    resid_term[i] = w[i] ? r : -e[i] * r / (1.0 - e[i]);
    const auto k = static_cast<std::size_t>(fold[i]);
    num[k] += resid_term[i];
    treated[k] += w[i];
    n1 += w[i];
  }
  DmlResult res;
  auto& comp = res.components;
  comp.tau_k.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (treated[k] == 0) {
      throw EstimationError("DML fold " + std::to_string(k) + " has no treated users");
    }
    comp.tau_k[k] = num[k] / static_cast<double>(treated[k]);
  }
  comp.tau = mean(comp.tau_k);

  const double p_hat = static_cast<double>(n1) / static_cast<double>(n);
  comp.psi.resize(n);
  double jac = 0.0, sum_sq = 0.0, r1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tk = comp.tau_k[static_cast<std::size_t>(fold[i])];
    comp.psi[i] = (resid_term[i] - w[i] * tk) / p_hat;
    jac += -static_cast<double>(w[i]) / p_hat;
    sum_sq += comp.psi[i] * comp.psi[i];
    r1 += w[i] * y[i];
  }
  const double dn = static_cast<double>(n);
  comp.jacobian = jac / dn;
  comp.sigma2 = (sum_sq / dn) / (comp.jacobian * comp.jacobian);

  auto& est = res.estimate;
  est.method = Method::kDml;
  est.att = comp.tau;
  est.se = std::sqrt(comp.sigma2 / dn);
  r1 /= static_cast<double>(n1);
  est.lift = obs_lift(est.att, r1);
  if (est.lift) est.lift_se = obs_lift_se(est.att, est.se, r1, n1);
  est.n_used = n;
  return res;
}

void check_predictions(const CrossFitPredictions& cf, std::size_t n) {
  if (cf.fold_of.size() != n || cf.e_hat.size() != n || cf.g0_hat.size() != n ||
      cf.g1_hat.size() != n) {
    throw DataError("cross-fit predictions do not cover every user");
  }
  if (cf.folds < 1) throw DataError("cross-fit predictions declare no folds");
  for (double e : cf.e_hat) {
    if (!(e > 0.0 && e < 1.0)) throw DataError("propensity scores must lie strictly in (0,1)");
  }
}

}  // namespace

std::optional<double> obs_lift(double att, double exposed_rate) {
  const double denom = exposed_rate - att;
  if (!(denom > 0.0)) return std::nullopt;
  return att / denom;
}

EffectEstimate exposed_unexposed(const ExperimentDataset& ds, const std::string& event) {
  const auto c = test_columns(ds, event);
  return eu_core(c.w, c.y);
}

Stratification stratify(std::span<const double> e_hat, std::span<const std::uint8_t> w,
                        int strata) {
  if (strata < 1) throw ConfigError("need at least one stratum");
  if (e_hat.size() != w.size()) throw DataError("propensity scores do not cover every user");
  const std::size_t J = static_cast<std::size_t>(strata);
  Stratification st;
  st.boundaries.resize(J + 1);
  for (std::size_t j = 0; j <= J; ++j) {
    st.boundaries[j] = static_cast<double>(j) / static_cast<double>(J);
  }
  st.assignment.resize(e_hat.size());
  st.n_treated.assign(J, 0);
  st.n_untreated.assign(J, 0);
  const auto& b = st.boundaries;
  for (std::size_t i = 0; i < e_hat.size(); ++i) {
    const double e = e_hat[i];
    if (!(e >= 0.0 && e <= 1.0)) throw DataError("propensity score outside [0,1]");
    auto s = static_cast<std::ptrdiff_t>(std::ceil(e * static_cast<double>(J))) - 1;
    s = std::clamp<std::ptrdiff_t>(s, 0, static_cast<std::ptrdiff_t>(J) - 1);
    // Settle rounding against the exact boundaries: b[s] < e <= b[s+1].
    while (s > 0 && e <= b[static_cast<std::size_t>(s)]) --s;
    while (s + 1 < static_cast<std::ptrdiff_t>(J) && e > b[static_cast<std::size_t>(s) + 1]) ++s;
    st.assignment[i] = static_cast<int>(s);
    (w[i] ? st.n_treated : st.n_untreated)[static_cast<std::size_t>(s)]++;
  }
  std::size_t kept_treated = 0;
  for (std::size_t j = 0; j < J; ++j) {
    if (st.n_treated[j] > 0 && st.n_untreated[j] == 0) {
      st.dropped_strata.push_back(static_cast<int>(j));
    } else if (st.n_treated[j] > 0) {
      kept_treated += st.n_treated[j];
    }
  }
  st.weights.assign(J, 0.0);
  if (kept_treated == 0) return st;
  for (std::size_t j = 0; j < J; ++j) {
    if (st.n_treated[j] > 0 && st.n_untreated[j] > 0) {
      st.weights[j] = static_cast<double>(st.n_treated[j]) / static_cast<double>(kept_treated);
    }
  }
  return st;
}

SpsmResult spsm_att(const ExperimentDataset& ds, const std::string& event,
                    std::span<const double> e_hat, int strata, SpsmVariance variance) {
  const auto c = test_columns(ds, event);
  if (e_hat.size() != c.size()) throw DataError("propensity scores do not cover every user");
  const auto a = arm_rates(c.w, c.y);
  if (a.n1 == 0 || a.n0 == 0) throw EstimationError("SPSM needs both exposure classes");
  return spsm_core(e_hat, c.w, c.y, strata, variance);
}

DmlResult dml_att(const ExperimentDataset& ds, const std::string& event,
                  const CrossFitPredictions& cf, DmlVariant variant) {
  const auto c = test_columns(ds, event);
  check_predictions(cf, c.size());
  return dml_core(cf.e_hat, c.w, c.y, cf.g0_hat, cf.g1_hat, cf.fold_of, cf.folds, variant);
}

std::optional<double> bootstrap_obs_lift_se(const ExperimentDataset& ds, const std::string& event,
                                            Method method, const CrossFitPredictions* cf,
                                            std::size_t replicates, std::uint64_t seed,
                                            int strata, DmlVariant variant) {
  const auto c = test_columns(ds, event);
  const std::size_t n = c.size();
  if (method != Method::kExposedUnexposed) {
    if (!cf) throw std::invalid_argument("SPSM/DML bootstrap needs cross-fit predictions");
    check_predictions(*cf, n);
  }
  if (n == 0) throw EstimationError("bootstrap needs users");
  std::vector<double> lifts;
  std::vector<std::uint8_t> w(n), y(n);
  std::vector<double> e(n), g0(n), g1(n);
  std::vector<int> fold(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t b = 0; b < replicates; ++b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = pick(rng);
      w[k] = c.w[i];
      y[k] = c.y[i];
      if (cf) {
        e[k] = cf->e_hat[i];
        g0[k] = cf->g0_hat[i];
        g1[k] = cf->g1_hat[i];
        fold[k] = cf->fold_of[i];
      }
    }
    try {
      EffectEstimate est;
      switch (method) {
        case Method::kSpsm: est = spsm_core(e, w, y, strata, SpsmVariance::kCorrected).estimate; break;
        case Method::kDml: est = dml_core(e, w, y, g0, g1, fold, cf->folds, variant).estimate; break;
        default: est = eu_core(w, y); break;
      }
      if (est.lift && std::isfinite(*est.lift)) lifts.push_back(*est.lift);
    } catch (const EstimationError&) {
      // Degenerate replicate; skipped like an undefined lift.
    }
  }
  if (lifts.size() < 2) return std::nullopt;
  return sample_sd(lifts);
}

}  // namespace adlift
