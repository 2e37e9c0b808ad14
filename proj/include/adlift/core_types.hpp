#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adlift {

enum class Funnel { kUpper, kMid, kLower };

std::string_view to_string(Funnel f);
Funnel funnel_from_string(std::string_view s);

struct OutcomeEvent {
  std::string name;
  Funnel funnel = Funnel::kUpper;

  bool operator==(const OutcomeEvent&) const = default;
};

// One targeted user. `y` maps outcome-event name to a 0/1 conversion.
struct UserRecord {
  std::string user_id;
  int z = 0;  // 1 = test, 0 = control
  int w = 0;  // 1 = exposed
  std::map<std::string, int> y;
  std::vector<double> dense;
  std::vector<int> sparse;  // sorted, unique interest indices
  double action_rate = 0.0;
  int prior_outcome = 0;

  bool operator==(const UserRecord&) const = default;
};

// Column description shared by every row of a dataset.
struct FeatureSchema {
  std::vector<std::string> dense_names;
  int sparse_vocab = 0;

  std::size_t dense_dim() const { return dense_names.size(); }
  bool operator==(const FeatureSchema&) const = default;
};

struct ExperimentMeta {
  std::string experiment_id;
  std::vector<OutcomeEvent> outcome_events;
  double planned_split = 0.5;  // test fraction
  int length_days = 1;
  std::string vertical;
  double prospecting_ratio = 0.0;

  const OutcomeEvent* find_event(std::string_view name) const;
  bool operator==(const ExperimentMeta&) const = default;
};

struct ExperimentDataset {
  std::vector<UserRecord> users;
  ExperimentMeta meta;
  FeatureSchema schema;

  std::size_t size() const { return users.size(); }
  bool operator==(const ExperimentDataset&) const = default;
};

enum class Method { kRctItt, kRctAtt, kExposedUnexposed, kSpsm, kDml };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

// A treatment-effect estimate. Lifts are std::nullopt when the lift
// denominator is not strictly positive.
struct EffectEstimate {
  Method method = Method::kExposedUnexposed;
  double att = 0.0;
  double se = 0.0;
  std::optional<double> lift;
  std::optional<double> lift_se;
  std::size_t n_used = 0;
};

enum class ViolationKind {
  kDuplicateId,
  kControlExposed,
  kNonBinary,
  kRaggedDense,
  kSparseOutOfRange,
  kMissingOutcome,
  kBadMeta,
  kTooFewUsers,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::optional<std::size_t> row;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind k) const;
  std::string summary(std::size_t max_lines = 10) const;
};

// Checks every dataset invariant and reports all breaches; never throws.
ValidationReport validate_dataset(const ExperimentDataset& ds);

// Per-user 0/1 columns for one outcome event, in row order.
struct OutcomeColumns {
  std::vector<std::uint8_t> z;
  std::vector<std::uint8_t> w;
  std::vector<std::uint8_t> y;

  std::size_t size() const { return y.size(); }
};

// Throws DataError if a user lacks the event.
OutcomeColumns outcome_columns(const ExperimentDataset& ds, const std::string& event);

// Copy of the dataset restricted to test-group users (z = 1).
ExperimentDataset test_group(const ExperimentDataset& ds);

}  // namespace adlift
