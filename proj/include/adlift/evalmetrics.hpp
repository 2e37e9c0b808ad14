#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adlift/core_types.hpp"

namespace adlift {

// Absolute percentage error |(lift_m - lift_rct) / lift_rct|; empty when the
// RCT lift is not positive.
std::optional<double> ape(double lift_m, double lift_rct);

// Absolute error |lift_m - lift_rct|.
double ae(double lift_m, double lift_rct);

// Remaining percentage bias 100 * ape_m / ape_eu; may exceed 100. Empty
// when ape_eu is 0.
std::optional<double> rpb(double ape_eu, double ape_m);

// Caps values above the nearest-rank `upper_pct` percentile of their group
// at that percentile. Groups are keyed by funnel position.
std::vector<double> winsorize(std::span<const double> values, std::span<const Funnel> groups,
                              double upper_pct = 0.95);
std::vector<double> winsorize(std::span<const double> values, double upper_pct = 0.95);

// Equal-count deciles 1..10 of `lifts` within each funnel group, ranked
// ascending with ties in input order. Throws DataError when a group holds
// fewer than 10 items.
std::vector<int> assign_deciles(std::span<const double> lifts, std::span<const Funnel> funnels);

// Observational methods compared against the RCT.
inline constexpr std::array<Method, 2> kComparedMethods = {Method::kSpsm, Method::kDml};

struct MethodComparison {
  std::optional<double> lift;
  std::optional<double> lift_se;
  std::optional<double> ape;
  std::optional<double> ae;
  std::optional<double> rpb;
  std::optional<bool> diff_significant;  // two-sided z-test at 5%
};

// One RCT (experiment x outcome event) compared with observational methods.
// Keys of `methods` are method names; "exposed_unexposed" is the baseline.
struct EvaluationRecord {
  std::string experiment_id;
  std::string event;
  Funnel funnel = Funnel::kUpper;
  std::optional<double> rct_lift;
  std::optional<double> rct_lift_se;
  bool rct_significant = false;
  int decile = 0;  // 0 until assigned
  std::map<std::string, MethodComparison> methods;
  std::map<std::string, double> characteristics;
};

// Fills ape/ae/rpb/diff_significant for every method from the lifts and SEs
// already stored on the record.
void score_record(EvaluationRecord& rec);

// Two-sided z-test of lift_a == lift_b treating the estimates as independent.
std::optional<bool> lifts_differ(double lift_a, double se_a, double lift_b, double se_b);

// Sets `decile` on every record with a defined RCT lift, per funnel; records
// in funnels with fewer than 10 defined lifts keep decile 0.
void assign_record_deciles(std::vector<EvaluationRecord>& records);

struct SignificanceCell {
  std::size_t indistinguishable = 0;  // difference p > 0.05
  std::size_t different = 0;          // difference p <= 0.05
  double percent_different() const;
};

// Rows: funnel ("all", "upper", "mid", "lower") x RCT significance.
struct SignificanceRow {
  std::string funnel;
  bool rct_significant = false;
  std::map<std::string, SignificanceCell> by_method;
};

struct SignificanceTable {
  std::vector<SignificanceRow> rows;
  std::size_t excluded = 0;  // records with an undefined lift or SE
};

SignificanceTable significance_table(const std::vector<EvaluationRecord>& records,
                                     std::span<const Method> methods = kComparedMethods);

// Median APE and AE by (funnel, decile) for each method, plus per-funnel
// medians across deciles.
struct DecileSummary {
  std::string funnel;
  int decile = 0;  // 0 for the funnel-wide median row
  std::size_t n = 0;
  double median_rct_lift = 0.0;
  std::map<std::string, std::optional<double>> median_ape;
  std::map<std::string, std::optional<double>> median_ae;
};

std::vector<DecileSummary> decile_summary(const std::vector<EvaluationRecord>& records,
                                          std::span<const Method> methods = kComparedMethods);

// Share of records where a method improves on exposed-unexposed, and shares
// reducing the baseline's APE by at least 50% and 80%.
struct ImprovementRow {
  std::string funnel;
  std::string method;
  std::size_t n = 0;
  double improved = 0.0;       // ape_m < ape_eu
  double rpb_at_most_50 = 0.0;
  double rpb_at_most_20 = 0.0;
  std::optional<double> median_rpb;
};

std::vector<ImprovementRow> improvement_summary(const std::vector<EvaluationRecord>& records,
                                                std::span<const Method> methods = kComparedMethods);

// Aligned plain-text rendering of the three summaries.
std::string render_tables(const SignificanceTable& sig, const std::vector<DecileSummary>& deciles,
                          const std::vector<ImprovementRow>& improvement);

}  // namespace adlift
