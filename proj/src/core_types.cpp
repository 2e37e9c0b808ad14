#include "adlift/core_types.hpp"

#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "adlift/errors.hpp"
#include "adlift/seeding.hpp"

namespace adlift {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string_view to_string(Funnel f) {
  switch (f) {
    case Funnel::kUpper: return "upper";
    case Funnel::kMid: return "mid";
    case Funnel::kLower: return "lower";
  }
  return "upper";
}

Funnel funnel_from_string(std::string_view s) {
  if (s == "upper") return Funnel::kUpper;
  if (s == "mid") return Funnel::kMid;
  if (s == "lower") return Funnel::kLower;
  throw DataError("unknown funnel position '" + std::string(s) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kRctItt: return "rct_itt";
    case Method::kRctAtt: return "rct_att";
    case Method::kExposedUnexposed: return "exposed_unexposed";
    case Method::kSpsm: return "spsm";
    case Method::kDml: return "dml";
  }
  return "rct_itt";
}

Method method_from_string(std::string_view s) {
  if (s == "rct_itt") return Method::kRctItt;
  if (s == "rct_att") return Method::kRctAtt;
  if (s == "exposed_unexposed" || s == "eu") return Method::kExposedUnexposed;
  if (s == "spsm") return Method::kSpsm;
  if (s == "dml") return Method::kDml;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kDuplicateId: return "duplicate id";
    case ViolationKind::kControlExposed: return "control-exposed";
    case ViolationKind::kNonBinary: return "non-binary value";
    case ViolationKind::kRaggedDense: return "ragged dense vector";
    case ViolationKind::kSparseOutOfRange: return "sparse index out of range";
    case ViolationKind::kMissingOutcome: return "missing outcome";
    case ViolationKind::kBadMeta: return "bad metadata";
    case ViolationKind::kTooFewUsers: return "too few users";
  }
  return "unknown";
}

const OutcomeEvent* ExperimentMeta::find_event(std::string_view name) const {
  for (const auto& e : outcome_events) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::size_t ValidationReport::count(ViolationKind k) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == k;
  return n;
}

std::string ValidationReport::summary(std::size_t max_lines) const {
  std::ostringstream out;
  out << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_lines; ++i) {
    const auto& v = violations[i];
    out << "\n  " << to_string(v.kind);
    if (v.row) out << " (row " << *v.row << ")";
    if (!v.message.empty()) out << ": " << v.message;
  }
  if (violations.size() > max_lines) out << "\n  ...";
  return out.str();
}

namespace {

bool is_binary(int v) { return v == 0 || v == 1; }

}  // namespace

ValidationReport validate_dataset(const ExperimentDataset& ds) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::optional<std::size_t> row, std::string msg) {
    report.violations.push_back({kind, row, std::move(msg)});
  };

  const auto& meta = ds.meta;
  if (!(meta.planned_split > 0.0 && meta.planned_split < 1.0)) {
    add(ViolationKind::kBadMeta, std::nullopt, "planned_split must lie in (0,1)");
  }
  if (!(meta.prospecting_ratio >= 0.0 && meta.prospecting_ratio <= 1.0)) {
    add(ViolationKind::kBadMeta, std::nullopt, "prospecting_ratio must lie in [0,1]");
  }
  if (meta.length_days < 1) {
    add(ViolationKind::kBadMeta, std::nullopt, "length_days must be positive");
  }
  if (meta.outcome_events.empty()) {
    add(ViolationKind::kBadMeta, std::nullopt, "no outcome events declared");
  }
  if (ds.users.size() < 2) {
    add(ViolationKind::kTooFewUsers, std::nullopt,
        "need at least 2 users, got " + std::to_string(ds.users.size()));
  }

  const std::size_t dim = ds.schema.dense_dim();
  std::unordered_set<std::string_view> seen;
  seen.reserve(ds.users.size());
  for (std::size_t i = 0; i < ds.users.size(); ++i) {
    const auto& u = ds.users[i];
    if (!seen.insert(u.user_id).second) {
      add(ViolationKind::kDuplicateId, i, "user_id '" + u.user_id + "'");
    }
    if (!is_binary(u.z) || !is_binary(u.w) || !is_binary(u.prior_outcome)) {
      add(ViolationKind::kNonBinary, i, "z, w and prior_outcome must be 0/1");
    }
    if (u.z == 0 && u.w == 1) {
      add(ViolationKind::kControlExposed, i, "control user marked exposed");
    }
    for (const auto& [name, v] : u.y) {
      if (!is_binary(v)) add(ViolationKind::kNonBinary, i, "outcome '" + name + "'");
    }
    for (const auto& e : meta.outcome_events) {
      if (!u.y.count(e.name)) add(ViolationKind::kMissingOutcome, i, e.name);
    }
    if (u.dense.size() != dim) {
      add(ViolationKind::kRaggedDense, i,
          "expected " + std::to_string(dim) + " dense values, got " +
              std::to_string(u.dense.size()));
    }
    for (int s : u.sparse) {
      if (s < 0 || (ds.schema.sparse_vocab > 0 && s >= ds.schema.sparse_vocab)) {
        add(ViolationKind::kSparseOutOfRange, i, std::to_string(s));
        break;
      }
    }
    if (!(u.action_rate >= 0.0 && u.action_rate <= 1.0)) {
      add(ViolationKind::kNonBinary, i, "action_rate outside [0,1]");
    }
  }
  return report;
}

OutcomeColumns outcome_columns(const ExperimentDataset& ds, const std::string& event) {
  OutcomeColumns c;
  const std::size_t n = ds.users.size();
  c.z.resize(n);
  c.w.resize(n);
  c.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = ds.users[i];
    auto it = u.y.find(event);
    if (it == u.y.end()) {
      throw DataError("user '" + u.user_id + "' has no outcome '" + event + "'");
    }
    c.z[i] = static_cast<std::uint8_t>(u.z);
    c.w[i] = static_cast<std::uint8_t>(u.w);
    c.y[i] = static_cast<std::uint8_t>(it->second);
  }
  return c;
}

ExperimentDataset test_group(const ExperimentDataset& ds) {
  ExperimentDataset out;
  out.meta = ds.meta;
  out.schema = ds.schema;
  for (const auto& u : ds.users) {
    if (u.z == 1) out.users.push_back(u);
  }
  return out;
}

}  // namespace adlift
