#include "adlift/serialize.hpp"

#include <cmath>
#include <set>
#include <string>

#include "adlift/errors.hpp"

namespace adlift {

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json opt(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

std::optional<double> read_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

// Wraps json type errors in the error class for the caller's domain.
template <class Err, class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Err(std::string(what) + ": " + e.what());
  }
}

// Reads config keys, rejecting unknown ones.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + ": bad value for '" + key + "'");
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Funnel funnel_or_config_error(const std::string& s) {
  try {
    return funnel_from_string(s);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Json to_json(const UserRecord& u) {
  Json y = Json::object();
  for (const auto& [k, v] : u.y) y[k] = v;
  return {{"user_id", u.user_id}, {"z", u.z},
          {"w", u.w},             {"y", y},
          {"dense", u.dense},     {"sparse", u.sparse},
          {"action_rate", u.action_rate}, {"prior_outcome", u.prior_outcome}};
}

Json to_json(const FeatureSchema& s) {
  return {{"dense_names", s.dense_names}, {"sparse_vocab", s.sparse_vocab}};
}

Json to_json(const ExperimentMeta& m) {
  Json events = Json::array();
  for (const auto& e : m.outcome_events) {
    events.push_back({{"name", e.name}, {"funnel", std::string(to_string(e.funnel))}});
  }
  return {{"experiment_id", m.experiment_id}, {"outcome_events", events},
          {"planned_split", m.planned_split}, {"length_days", m.length_days},
          {"vertical", m.vertical},           {"prospecting_ratio", m.prospecting_ratio}};
}

Json to_json(const SimConfig& c) {
  Json events = Json::array();
  for (const auto& e : c.events) {
    events.push_back({{"name", e.name},
                      {"funnel", std::string(to_string(e.funnel))},
                      {"baseline_rate", e.baseline_rate},
                      {"true_lift", e.true_lift}});
  }
  return {{"experiment_id", c.experiment_id},
          {"n_users", c.n_users},
          {"planned_split", c.planned_split},
          {"dense_dim", c.dense_dim},
          {"sparse_vocab", c.sparse_vocab},
          {"sparse_mean_active", c.sparse_mean_active},
          {"selection_strength", c.selection_strength},
          {"confounding_overlap", c.confounding_overlap},
          {"hidden_fraction", c.hidden_fraction},
          {"true_lift", c.true_lift},
          {"baseline_rate", c.baseline_rate},
          {"exposure_noise", c.exposure_noise},
          {"exposure_intercept", c.exposure_intercept},
          {"outcome_strength", c.outcome_strength},
          {"events", events},
          {"length_days", c.length_days},
          {"vertical", c.vertical},
          {"prospecting_ratio", c.prospecting_ratio},
          {"seed", c.seed}};
}

Json to_json(const GroundTruth& g) {
  Json events = Json::object();
  for (const auto& [name, t] : g.events) {
    events[name] = {{"true_att", num(t.true_att)},
                    {"true_lift", num(t.true_lift)},
                    {"counterfactual_rate", num(t.counterfactual_rate)}};
  }
  return {{"true_att", num(g.true_att)},
          {"true_lift", num(g.true_lift)},
          {"exposure_rate", num(g.exposure_rate)},
          {"hidden_feature_indices", g.hidden_feature_indices},
          {"events", events}};
}

Json to_json(const ModelSpec& s) {
  return {{"kind", s.kind == ModelKind::kLogistic ? "logistic" : "mlp"},
          {"hidden_layers", s.hidden_layers},
          {"learning_rate", s.learning_rate},
          {"epochs", s.epochs},
          {"l2", s.l2},
          {"batch", s.batch},
          {"seed", s.seed}};
}

Json to_json(const EffectEstimate& e) {
  return {{"method", std::string(to_string(e.method))},
          {"att", num(e.att)},
          {"se", num(e.se)},
          {"lift", opt(e.lift)},
          {"lift_se", opt(e.lift_se)},
          {"n_used", e.n_used}};
}

Json to_json(const RctResult& r) {
  Json ci = nullptr;
  if (r.lift_ci) ci = Json::array({num(r.lift_ci->first), num(r.lift_ci->second)});
  return {{"experiment_id", r.experiment_id},
          {"event", r.event},
          {"funnel", std::string(to_string(r.funnel))},
          {"itt", num(r.itt)},
          {"itt_se", num(r.itt_se)},
          {"att", num(r.att)},
          {"att_se", num(r.att_se)},
          {"lift", opt(r.lift)},
          {"lift_se", opt(r.lift_se)},
          {"lift_ci", ci},
          {"lift_ci_unreliable", r.lift_ci_unreliable},
          {"lift_se_delta", opt(r.lift_se_delta)},
          {"exposure_rate", num(r.exposure_rate)},
          {"treated_rate", num(r.treated_rate)},
          {"control_rate", num(r.control_rate)},
          {"n_test", r.n_test},
          {"n_control", r.n_control},
          {"cohens_d", opt(r.cohens_d)},
          {"significant_5pct", r.significant_5pct}};
}

Json to_json(const Stratification& s) {
  std::size_t kept = 0;
  for (std::size_t j = 0; j < s.weights.size(); ++j) kept += s.weights[j] > 0.0;
  return {{"strata", s.n_treated.size()},
          {"kept_strata", kept},
          {"dropped_strata", s.dropped_strata},
          {"n_treated", s.n_treated},
          {"n_untreated", s.n_untreated}};
}

Json to_json(const CrossFitPredictions& cf) {
  Json auc_g = Json::array();
  for (const auto& a : cf.auc_outcome) auc_g.push_back(opt(a));
  return {{"folds", cf.folds},
          {"auc_propensity", cf.auc_propensity},
          {"auc_outcome", auc_g},
          {"mean_auc_propensity", num(cf.mean_auc_propensity())},
          {"mean_auc_outcome", opt(cf.mean_auc_outcome())},
          {"training_size", cf.training_size}};
}

Json to_json(const EvaluationRecord& r) {
  Json methods = Json::object();
  for (const auto& [name, m] : r.methods) {
    methods[name] = {{"lift", opt(m.lift)}, {"lift_se", opt(m.lift_se)}, {"ape", opt(m.ape)},
                     {"ae", opt(m.ae)},     {"rpb", opt(m.rpb)},
                     {"diff_significant", m.diff_significant ? Json(*m.diff_significant) : Json(nullptr)}};
  }
  Json chars = Json::object();
  for (const auto& [k, v] : r.characteristics) chars[k] = num(v);
  return {{"experiment_id", r.experiment_id},
          {"event", r.event},
          {"funnel", std::string(to_string(r.funnel))},
          {"rct_lift", opt(r.rct_lift)},
          {"rct_lift_se", opt(r.rct_lift_se)},
          {"rct_significant", r.rct_significant},
          {"decile", r.decile},
          {"methods", methods},
          {"characteristics", chars}};
}

Json to_json(const SignificanceTable& t) {
  Json rows = Json::array();
  for (const auto& row : t.rows) {
    Json cells = Json::object();
    for (const auto& [m, c] : row.by_method) {
      cells[m] = {{"indistinguishable", c.indistinguishable},
                  {"different", c.different},
                  {"percent_different", num(c.percent_different())}};
    }
    rows.push_back({{"funnel", row.funnel}, {"rct_significant", row.rct_significant}, {"methods", cells}});
  }
  return {{"rows", rows}, {"excluded", t.excluded}};
}

Json to_json(const std::vector<DecileSummary>& d) {
  Json out = Json::array();
  for (const auto& s : d) {
    Json ape = Json::object(), ae_j = Json::object();
    for (const auto& [m, v] : s.median_ape) ape[m] = opt(v);
    for (const auto& [m, v] : s.median_ae) ae_j[m] = opt(v);
    out.push_back({{"funnel", s.funnel},
                   {"decile", s.decile},
                   {"n", s.n},
                   {"median_rct_lift", num(s.median_rct_lift)},
                   {"median_ape", ape},
                   {"median_ae", ae_j}});
  }
  return out;
}

Json to_json(const std::vector<ImprovementRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"funnel", r.funnel},
                   {"method", r.method},
                   {"n", r.n},
                   {"improved", num(r.improved)},
                   {"rpb_at_most_50", num(r.rpb_at_most_50)},
                   {"rpb_at_most_20", num(r.rpb_at_most_20)},
                   {"median_rpb", opt(r.median_rpb)}});
  }
  return out;
}

Json to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees}, {"mtry", p.mtry},       {"min_node", p.min_node},
          {"max_depth", p.max_depth}, {"seed", p.seed}};
}

Json to_json(const ImportanceReport& r) {
  Json features = Json::array();
  for (std::size_t k = 0; k < r.features.size(); ++k) {
    features.push_back({{"feature", r.features[k]},
                        {"raw_drop", num(r.raw_drop[k])},
                        {"scaled", num(r.scaled[k])}});
  }
  return {{"baseline_r2", num(r.baseline_r2)}, {"features", features}};
}

Json to_json(const PartialDependence& pd) {
  Json curve = Json::array();
  for (const auto& [v, p] : pd.curve) curve.push_back({num(v), num(p)});
  return {{"feature", pd.feature}, {"curve", curve}, {"rug", pd.rug}};
}

UserRecord user_from_json(const Json& j) {
  return guarded<DataError>("user record", [&] {
    UserRecord u;
    u.user_id = j.at("user_id").get<std::string>();
    u.z = j.at("z").get<int>();
    u.w = j.at("w").get<int>();
    for (const auto& [k, v] : j.at("y").items()) u.y[k] = v.get<int>();
    u.dense = j.value("dense", std::vector<double>{});
    u.sparse = j.value("sparse", std::vector<int>{});
    u.action_rate = j.value("action_rate", 0.0);
    u.prior_outcome = j.value("prior_outcome", 0);
    return u;
  });
}

FeatureSchema schema_from_json(const Json& j) {
  return guarded<DataError>("schema", [&] {
    FeatureSchema s;
    s.dense_names = j.value("dense_names", std::vector<std::string>{});
    s.sparse_vocab = j.value("sparse_vocab", 0);
    return s;
  });
}

ExperimentMeta meta_from_json(const Json& j) {
  return guarded<DataError>("experiment metadata", [&] {
    ExperimentMeta m;
    m.experiment_id = j.at("experiment_id").get<std::string>();
    for (const auto& e : j.at("outcome_events")) {
      m.outcome_events.push_back({e.at("name").get<std::string>(),
                                  funnel_from_string(e.at("funnel").get<std::string>())});
    }
    m.planned_split = j.at("planned_split").get<double>();
    m.length_days = j.value("length_days", 1);
    m.vertical = j.value("vertical", std::string{});
    m.prospecting_ratio = j.value("prospecting_ratio", 0.0);
    return m;
  });
}

EffectEstimate effect_from_json(const Json& j) {
  return guarded<DataError>("effect estimate", [&] {
    EffectEstimate e;
    e.method = method_from_string(j.at("method").get<std::string>());
    e.att = j.at("att").is_null() ? std::nan("") : j.at("att").get<double>();
    e.se = j.at("se").is_null() ? std::nan("") : j.at("se").get<double>();
    e.lift = read_opt(j, "lift");
    e.lift_se = read_opt(j, "lift_se");
    e.n_used = j.value("n_used", std::size_t{0});
    return e;
  });
}

RctResult rct_result_from_json(const Json& j) {
  return guarded<DataError>("rct result", [&] {
    RctResult r;
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.event = j.at("event").get<std::string>();
    r.funnel = funnel_from_string(j.at("funnel").get<std::string>());
    auto d = [&](const char* k) { return j.at(k).is_null() ? std::nan("") : j.at(k).get<double>(); };
    r.itt = d("itt");
    r.itt_se = d("itt_se");
    r.att = d("att");
    r.att_se = d("att_se");
    r.lift = read_opt(j, "lift");
    r.lift_se = read_opt(j, "lift_se");
    if (j.contains("lift_ci") && !j.at("lift_ci").is_null()) {
      r.lift_ci = std::pair{j.at("lift_ci").at(0).get<double>(), j.at("lift_ci").at(1).get<double>()};
    }
    r.lift_ci_unreliable = j.value("lift_ci_unreliable", false);
    r.lift_se_delta = read_opt(j, "lift_se_delta");
    r.exposure_rate = d("exposure_rate");
    r.treated_rate = d("treated_rate");
    r.control_rate = d("control_rate");
    r.n_test = j.at("n_test").get<std::size_t>();
    r.n_control = j.at("n_control").get<std::size_t>();
    r.cohens_d = read_opt(j, "cohens_d");
    r.significant_5pct = j.value("significant_5pct", false);
    return r;
  });
}

EvaluationRecord record_from_json(const Json& j) {
  return guarded<DataError>("evaluation record", [&] {
    EvaluationRecord r;
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.event = j.at("event").get<std::string>();
    r.funnel = funnel_from_string(j.at("funnel").get<std::string>());
    r.rct_lift = read_opt(j, "rct_lift");
    r.rct_lift_se = read_opt(j, "rct_lift_se");
    r.rct_significant = j.value("rct_significant", false);
    r.decile = j.value("decile", 0);
    for (const auto& [name, m] : j.at("methods").items()) {
      MethodComparison c;
      c.lift = read_opt(m, "lift");
      c.lift_se = read_opt(m, "lift_se");
      c.ape = read_opt(m, "ape");
      c.ae = read_opt(m, "ae");
      c.rpb = read_opt(m, "rpb");
      if (m.contains("diff_significant") && !m.at("diff_significant").is_null()) {
        c.diff_significant = m.at("diff_significant").get<bool>();
      }
      r.methods[name] = c;
    }
    if (j.contains("characteristics")) {
      for (const auto& [k, v] : j.at("characteristics").items()) {
        r.characteristics[k] = v.is_null() ? std::nan("") : v.get<double>();
      }
    }
    return r;
  });
}

SimConfig sim_config_from_json(const Json& j) {
  SimConfig c;
  ConfigReader r(j, "simulation config");
  r.get("experiment_id", c.experiment_id);
  r.get("n_users", c.n_users);
  r.get("planned_split", c.planned_split);
  r.get("dense_dim", c.dense_dim);
  r.get("sparse_vocab", c.sparse_vocab);
  r.get("sparse_mean_active", c.sparse_mean_active);
  r.get("selection_strength", c.selection_strength);
  r.get("confounding_overlap", c.confounding_overlap);
  r.get("hidden_fraction", c.hidden_fraction);
  r.get("true_lift", c.true_lift);
  r.get("baseline_rate", c.baseline_rate);
  r.get("exposure_noise", c.exposure_noise);
  r.get("exposure_intercept", c.exposure_intercept);
  r.get("outcome_strength", c.outcome_strength);
  r.get("length_days", c.length_days);
  r.get("vertical", c.vertical);
  r.get("prospecting_ratio", c.prospecting_ratio);
  r.get("seed", c.seed);
  if (const Json* ev = r.sub("events")) {
    if (!ev->is_array()) throw ConfigError("simulation config: 'events' must be an array");
    for (const auto& e : *ev) {
      SimEvent s;
      ConfigReader er(e, "simulation event");
      std::string funnel = "upper";
      er.get("name", s.name);
      er.get("funnel", funnel);
      er.get("baseline_rate", s.baseline_rate);
      er.get("true_lift", s.true_lift);
      er.finish();
      s.funnel = funnel_or_config_error(funnel);
      c.events.push_back(s);
    }
  }
  r.finish();
  validate_sim_config(c);
  return c;
}

ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec s;
  ConfigReader r(j, "model spec");
  std::string kind = "logistic";
  r.get("kind", kind);
  r.get("hidden_layers", s.hidden_layers);
  r.get("learning_rate", s.learning_rate);
  r.get("epochs", s.epochs);
  r.get("l2", s.l2);
  r.get("batch", s.batch);
  r.get("seed", s.seed);
  r.finish();
  if (kind == "logistic") {
    s.kind = ModelKind::kLogistic;
  } else if (kind == "mlp") {
    s.kind = ModelKind::kMlp;
  } else {
    throw ConfigError("model spec: unknown kind '" + kind + "'");
  }
  validate_model_spec(s);
  return s;
}

ForestParams forest_params_from_json(const Json& j) {
  ForestParams p;
  ConfigReader r(j, "forest params");
  r.get("n_trees", p.n_trees);
  r.get("mtry", p.mtry);
  r.get("min_node", p.min_node);
  r.get("max_depth", p.max_depth);
  r.get("seed", p.seed);
  r.finish();
  if (p.n_trees < 1 || p.mtry < 1 || p.min_node < 1 || p.max_depth < 0) {
    throw ConfigError("forest params: n_trees, mtry and min_node must be >= 1");
  }
  return p;
}

}  // namespace adlift
