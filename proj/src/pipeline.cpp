#include "adlift/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "adlift/errors.hpp"
#include "adlift/ingest.hpp"
#include "adlift/parallel.hpp"
#include "adlift/seeding.hpp"

namespace adlift {

namespace fs = std::filesystem;

namespace {

std::string variant_name(DmlVariant v) { return v == DmlVariant::kG0 ? "g0" : "gw"; }
std::string variance_name(SpsmVariance v) { return v == SpsmVariance::kCorrected ? "corrected" : "literal"; }

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read_key(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

// Stage-tagged rethrow that keeps the error class (and so the exit code).
template <class F>
auto stage(const std::string& tag, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + ": " + e.what());
  } catch (const EstimationError& e) {
    throw EstimationError(tag + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + ": " + e.what());
  }
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ObsOptions obs_options_from_json(const Json& j) {
  const std::string where = "observational options";
  check_keys(j, {"propensity", "outcome", "folds", "strata", "dml_variant", "spsm_variance", "bootstrap"},
             where);
  ObsOptions o;
  if (j.contains("propensity")) o.propensity = model_spec_from_json(j.at("propensity"));
  if (j.contains("outcome")) o.outcome = model_spec_from_json(j.at("outcome"));
  read_key(j, "folds", o.folds, where);
  read_key(j, "strata", o.strata, where);
  read_key(j, "bootstrap", o.bootstrap, where);
  std::string variant = "g0", variance = "corrected";
  read_key(j, "dml_variant", variant, where);
  read_key(j, "spsm_variance", variance, where);
  if (variant == "g0") {
    o.dml_variant = DmlVariant::kG0;
  } else if (variant == "gw") {
    o.dml_variant = DmlVariant::kGw;
  } else {
    throw ConfigError(where + ": dml_variant must be g0 or gw");
  }
  if (variance == "corrected") {
    o.spsm_variance = SpsmVariance::kCorrected;
  } else if (variance == "literal") {
    o.spsm_variance = SpsmVariance::kLiteral;
  } else {
    throw ConfigError(where + ": spsm_variance must be corrected or literal");
  }
  if (o.folds < 2) throw ConfigError(where + ": folds must be at least 2");
  if (o.strata < 1) throw ConfigError(where + ": strata must be at least 1");
  return o;
}

RunConfig run_config_from_json(const Json& j) {
  const std::string where = "run config";
  check_keys(j, {"master_seed", "experiments", "suite_size", "suite_users", "obs", "rct_bootstrap",
                 "run_meta", "forest"},
             where);
  RunConfig c;
  read_key(j, "master_seed", c.master_seed, where);
  read_key(j, "suite_size", c.suite_size, where);
  read_key(j, "suite_users", c.suite_users, where);
  read_key(j, "rct_bootstrap", c.rct_bootstrap, where);
  read_key(j, "run_meta", c.run_meta, where);
  if (j.contains("experiments")) {
    if (!j.at("experiments").is_array()) throw ConfigError(where + ": 'experiments' must be an array");
    for (const auto& e : j.at("experiments")) c.experiments.push_back(sim_config_from_json(e));
  }
  if (j.contains("obs")) c.obs = obs_options_from_json(j.at("obs"));
  if (j.contains("forest")) c.forest = forest_params_from_json(j.at("forest"));
  if (c.experiments.empty() && c.suite_size == 0) throw ConfigError(where + ": no experiments");
  if (c.experiments.empty() && c.suite_users < 100) throw ConfigError(where + ": suite_users must be at least 100");
  if (c.rct_bootstrap < 50) throw ConfigError(where + ": rct_bootstrap must be at least 50");
  std::set<std::string> ids;
  for (const auto& e : c.experiments) {
    if (!ids.insert(e.experiment_id).second) {
      throw ConfigError(where + ": duplicate experiment_id '" + e.experiment_id + "'");
    }
  }
  return c;
}

Json to_json(const RunConfig& c) {
  Json exps = Json::array();
  for (const auto& e : c.experiments) exps.push_back(to_json(e));
  return {{"master_seed", c.master_seed},
          {"experiments", exps},
          {"suite_size", c.suite_size},
          {"suite_users", c.suite_users},
          {"obs",
           {{"propensity", to_json(c.obs.propensity)},
            {"outcome", to_json(c.obs.outcome)},
            {"folds", c.obs.folds},
            {"strata", c.obs.strata},
            {"dml_variant", variant_name(c.obs.dml_variant)},
            {"spsm_variance", variance_name(c.obs.spsm_variance)},
            {"bootstrap", c.obs.bootstrap}}},
          {"rct_bootstrap", c.rct_bootstrap},
          {"run_meta", c.run_meta},
          {"forest", to_json(c.forest)}};
}

std::string config_hash(const Json& canonical) { return hex64(fnv1a(canonical.dump())); }
std::string config_hash(const RunConfig& c) { return config_hash(to_json(c)); }

std::vector<SimConfig> expand_experiments(const RunConfig& c) {
  std::vector<SimConfig> out = c.experiments;
  if (out.empty()) {
    std::mt19937_64 rng(derive_seed(c.master_seed, "suite"));
    auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    for (std::size_t i = 0; i < c.suite_size; ++i) {
      SimConfig s;
      char id[32];
      std::snprintf(id, sizeof id, "exp%03zu", i + 1);
      s.experiment_id = id;
      s.n_users = c.suite_users;
      const double splits[] = {0.5, 0.7, 0.9};
      s.planned_split = splits[std::uniform_int_distribution<int>(0, 2)(rng)];
      s.selection_strength = U(0.5, 2.0);
      s.confounding_overlap = U(0.5, 1.0);
      s.hidden_fraction = U(0.0, 0.6);
      s.exposure_intercept = U(-1.0, 1.0);
      s.length_days = std::uniform_int_distribution<int>(7, 42)(rng);
      s.prospecting_ratio = U(0.0, 1.0);
      s.events = {{"page_view", Funnel::kUpper, U(0.05, 0.12), U(0.05, 0.6)},
                  {"add_to_cart", Funnel::kMid, U(0.02, 0.05), U(0.05, 0.4)},
                  {"purchase", Funnel::kLower, U(0.005, 0.02), U(0.0, 0.3)}};
      out.push_back(s);
    }
  }
  for (auto& s : out) {
    s.seed = derive_seed(c.master_seed, "simulate/" + s.experiment_id);
    validate_sim_config(s);
  }
  return out;
}

std::map<std::string, double> experiment_characteristics(const ExperimentDataset& full,
                                                         const std::string& event,
                                                         const CrossFitPredictions* cf,
                                                         bool with_outcome_auc) {
  const auto c = outcome_columns(full, event);
  std::size_t n_test = 0, n_exposed = 0, n_control = 0, conv_control = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.z[i]) {
      ++n_test;
      n_exposed += c.w[i];
    } else {
      ++n_control;
      conv_control += c.y[i];
    }
  }
  std::map<std::string, double> ch;
  ch["length_days"] = full.meta.length_days;
  ch["n_test"] = static_cast<double>(n_test);
  ch["control_conv_rate"] = n_control ? static_cast<double>(conv_control) / static_cast<double>(n_control) : 0.0;
  ch["exposure_rate"] = n_test ? static_cast<double>(n_exposed) / static_cast<double>(n_test) : 0.0;
  ch["prospecting_ratio"] = full.meta.prospecting_ratio;
  const auto* ev = full.meta.find_event(event);
  const Funnel f = ev ? ev->funnel : Funnel::kUpper;
  ch["funnel_upper"] = f == Funnel::kUpper;
  ch["funnel_mid"] = f == Funnel::kMid;
  ch["funnel_lower"] = f == Funnel::kLower;
  if (cf) {
    ch["propensity_auc"] = cf->mean_auc_propensity();
    if (with_outcome_auc) {
      if (auto a = cf->mean_auc_outcome()) ch["outcome_auc"] = *a;
    }
  }
  return ch;
}

ObsAnalysis analyze_obs(const ExperimentDataset& full, const std::string& event, Method method,
                        const ObsOptions& opt, const CrossFitPredictions* cf, std::uint64_t seed) {
  const auto tg = test_group(full);
  ObsAnalysis out;
  out.diagnostics = Json::object();
  switch (method) {
    case Method::kExposedUnexposed:
      out.estimate = exposed_unexposed(tg, event);
      break;
    case Method::kSpsm: {
      if (!cf) throw std::invalid_argument("SPSM needs cross-fit predictions");
      auto r = spsm_att(tg, event, cf->e_hat, opt.strata, opt.spsm_variance);
      out.estimate = r.estimate;
      out.diagnostics["strata"] = to_json(r.strata);
      out.diagnostics["spsm_variance"] = variance_name(opt.spsm_variance);
      out.diagnostics["crossfit"] = to_json(*cf);
      break;
    }
    case Method::kDml: {
      if (!cf) throw std::invalid_argument("DML needs cross-fit predictions");
      auto r = dml_att(tg, event, *cf, opt.dml_variant);
      out.estimate = r.estimate;
      out.diagnostics["tau_k"] = r.components.tau_k;
      out.diagnostics["jacobian"] = r.components.jacobian;
      out.diagnostics["sigma2"] = r.components.sigma2;
      out.diagnostics["dml_variant"] = variant_name(opt.dml_variant);
      out.diagnostics["crossfit"] = to_json(*cf);
      break;
    }
    default:
      throw ConfigError("not an observational method: " + std::string(to_string(method)));
  }
  out.diagnostics["lift_se_delta"] = out.estimate.lift_se ? Json(*out.estimate.lift_se) : Json(nullptr);
  if (opt.bootstrap > 0) {
    out.estimate.lift_se = bootstrap_obs_lift_se(tg, event, method, cf, opt.bootstrap, seed, opt.strata,
                                                 opt.dml_variant);
    out.diagnostics["lift_se_source"] = "bootstrap";
  } else {
    out.diagnostics["lift_se_source"] = "delta";
  }
  return out;
}

EvaluationRecord make_record(const RctResult& rct, const std::map<std::string, EffectEstimate>& obs,
                             std::map<std::string, double> characteristics) {
  EvaluationRecord rec;
  rec.experiment_id = rct.experiment_id;
  rec.event = rct.event;
  rec.funnel = rct.funnel;
  rec.rct_lift = rct.lift;
  rec.rct_lift_se = rct.lift_se;
  rec.rct_significant = rct.significant_5pct;
  for (const auto& [name, e] : obs) {
    MethodComparison m;
    m.lift = e.lift;
    m.lift_se = e.lift_se;
    rec.methods[name] = m;
  }
  rec.characteristics = std::move(characteristics);
  score_record(rec);
  return rec;
}

Json evaluation_summary(std::vector<EvaluationRecord>& records, std::string* tables_text) {
  assign_record_deciles(records);
  const auto sig = significance_table(records);
  const auto dec = decile_summary(records);
  const auto imp = improvement_summary(records);
  if (tables_text) *tables_text = render_tables(sig, dec, imp);
  std::size_t undefined_ape = 0;
  for (const auto& r : records) {
    for (Method m : kComparedMethods) {
      auto it = r.methods.find(std::string(to_string(m)));
      if (it == r.methods.end() || !it->second.ape) ++undefined_ape;
    }
  }
  return {{"records", records.size()},
          {"undefined_ape", undefined_ape},
          {"significance", to_json(sig)},
          {"deciles", to_json(dec)},
          {"improvement", to_json(imp)}};
}

std::vector<MetaResult> run_meta(const std::vector<EvaluationRecord>& records, const ForestParams& p,
                                 std::size_t jobs) {
  std::vector<MetaResult> out;
  for (Method m : kComparedMethods) {
    MetaResult res;
    res.method = std::string(to_string(m));
    std::vector<std::string> names = {"length_days",       "n_test",       "control_conv_rate",
                                      "exposure_rate",     "propensity_auc", "prospecting_ratio",
                                      "funnel_upper",      "funnel_mid",   "funnel_lower"};
    if (m == Method::kDml) names.push_back("outcome_auc");
    FeatureTable X;
    X.names = names;
    X.columns.assign(names.size(), {});
    std::vector<double> y;
    for (const auto& r : records) {
      auto it = r.methods.find(res.method);
      if (it == r.methods.end() || !it->second.ape) continue;
      bool complete = true;
      for (const auto& n : names) {
        auto c = r.characteristics.find(n);
        complete = complete && c != r.characteristics.end() && std::isfinite(c->second);
      }
      if (!complete) continue;
      for (std::size_t k = 0; k < names.size(); ++k) X.columns[k].push_back(r.characteristics.at(names[k]));
      y.push_back(*it->second.ape);
    }
    try {
      ForestParams fp = p;
      fp.seed = derive_seed(p.seed, "forest/" + res.method);
      fp.jobs = jobs;
      const Forest f = fit_forest(X, y, fp);
      res.importance = permutation_importance(f, X, y, derive_seed(p.seed, "importance/" + res.method));
      for (const auto& n : f.feature_names()) {
        res.pdp.push_back(partial_dependence(f, X, n, default_pdp_grid(X, n)));
      }
    } catch (const DataError& e) {
      res.skipped = e.what();
    }
    out.push_back(std::move(res));
  }
  return out;
}

Json to_json(const MetaResult& m) {
  Json pdp = Json::array();
  for (const auto& p : m.pdp) pdp.push_back(to_json(p));
  return {{"method", m.method},
          {"skipped", m.skipped ? Json(*m.skipped) : Json(nullptr)},
          {"importance", m.skipped ? Json(nullptr) : to_json(m.importance)},
          {"pdp", pdp}};
}

std::string pdp_csv(const PartialDependence& pd) {
  std::ostringstream os;
  os << "value,mean_prediction\n";
  for (const auto& [v, p] : pd.curve) os << fmt_num(v) << ',' << fmt_num(p) << '\n';
  return os.str();
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Json run_pipeline(const RunConfig& cfg, const fs::path& out) {
  const auto exps = stage("config", [&] { return expand_experiments(cfg); });
  const std::string hash = config_hash(cfg);
  auto stamp = [&](Json j, std::uint64_t seed) {
    j["config_hash"] = hash;
    j["seed"] = seed;
    return j;
  };

  struct EventOut {
    RctResult rct;
    std::map<std::string, ObsAnalysis> obs;
    std::map<std::string, double> characteristics;
  };
  struct ExpOut {
    GroundTruth truth;
    std::vector<EventOut> events;
  };
  std::vector<ExpOut> results(exps.size());

  const Method obs_methods[] = {Method::kExposedUnexposed, Method::kSpsm, Method::kDml};
  parallel_for(exps.size(), cfg.jobs, [&](std::size_t i) {
    const auto& sc = exps[i];
    const std::string& id = sc.experiment_id;
    auto sim = stage("simulate " + id, [&] { return simulate_experiment(sc); });
    auto ds = observed_view(sim.dataset, sim.truth);
    write_dataset(ds, out / "simulate" / (id + ".jsonl"), DataFormat::kJsonl);
    write_json(out / "simulate" / (id + ".truth.json"), stamp(to_json(sim.truth), sc.seed));
    results[i].truth = sim.truth;

    Json rct_art = Json::array(), obs_art = Json::array();
    const auto tg = test_group(ds);
    for (const auto& ev : ds.meta.outcome_events) {
      const std::string tag = id + "/" + ev.name;
      EventOut eo;
      const auto rct_seed = derive_seed(cfg.master_seed, "rct/" + tag);
      eo.rct = stage("analyze-rct " + tag, [&] { return analyze_rct(ds, ev.name, cfg.rct_bootstrap, rct_seed); });
      rct_art.push_back(stamp(to_json(eo.rct), rct_seed));

      const auto cf_seed = derive_seed(cfg.master_seed, "crossfit/" + tag);
      const auto cf = stage("crossfit " + tag, [&] {
        return crossfit(cfg.obs.propensity, cfg.obs.outcome, tg, ev.name, cfg.obs.folds, cf_seed);
      });
      for (Method m : obs_methods) {
        const std::string name(to_string(m));
        const auto seed = derive_seed(cfg.master_seed, "obs/" + tag + "/" + name);
        auto a = stage("analyze-obs " + name + " " + tag,
                       [&] { return analyze_obs(ds, ev.name, m, cfg.obs, &cf, seed); });
        Json art = {{"experiment_id", id}, {"event", ev.name}, {"estimate", to_json(a.estimate)},
                    {"diagnostics", a.diagnostics}};
        obs_art.push_back(stamp(art, seed));
        eo.obs.emplace(name, std::move(a));
      }
      eo.characteristics = experiment_characteristics(ds, ev.name, &cf, true);
      results[i].events.push_back(std::move(eo));
    }
    write_json(out / "rct" / (id + ".json"), stamp({{"results", rct_art}}, cfg.master_seed));
    write_json(out / "obs" / (id + ".json"), stamp({{"results", obs_art}}, cfg.master_seed));
  });

  std::vector<EvaluationRecord> records;
  Json exp_report = Json::array();
  for (std::size_t i = 0; i < exps.size(); ++i) {
    Json evs = Json::array();
    for (const auto& eo : results[i].events) {
      std::map<std::string, EffectEstimate> est;
      Json obs_j = Json::object();
      for (const auto& [name, a] : eo.obs) {
        est[name] = a.estimate;
        obs_j[name] = to_json(a.estimate);
      }
      records.push_back(make_record(eo.rct, est, eo.characteristics));
      evs.push_back({{"event", eo.rct.event}, {"rct", to_json(eo.rct)}, {"observational", obs_j}});
    }
    exp_report.push_back({{"experiment_id", exps[i].experiment_id},
                          {"seed", exps[i].seed},
                          {"truth", to_json(results[i].truth)},
                          {"events", evs}});
  }

  std::string tables;
  Json summary = stage("evaluate", [&] { return evaluation_summary(records, &tables); });
  {
    fs::create_directories(out / "evaluate");
    std::ofstream rec_out(out / "evaluate" / "records.jsonl");
    for (const auto& r : records) rec_out << stamp(to_json(r), cfg.master_seed).dump() << '\n';
    std::ofstream(out / "evaluate" / "tables.txt") << tables;
    write_json(out / "evaluate" / "summary.json", stamp(summary, cfg.master_seed));
  }

  Json meta_j = nullptr;
  if (cfg.run_meta) {
    ForestParams fp = cfg.forest;
    fp.seed = derive_seed(derive_seed(cfg.master_seed, "meta"), cfg.forest.seed);
    const auto meta = stage("meta", [&] { return run_meta(records, fp, cfg.jobs); });
    meta_j = Json::array();
    for (const auto& m : meta) {
      meta_j.push_back(to_json(m));
      for (const auto& pd : m.pdp) {
        fs::create_directories(out / "meta");
        std::ofstream(out / "meta" / ("pdp_" + m.method + "_" + pd.feature + ".csv")) << pdp_csv(pd);
      }
    }
    write_json(out / "meta" / "importance.json", stamp({{"methods", meta_j}}, fp.seed));
  }

  Json report = {{"config_hash", hash},
                 {"master_seed", cfg.master_seed},
                 {"config", to_json(cfg)},
                 {"experiments", exp_report},
                 {"evaluation", summary},
                 {"meta", meta_j}};
  write_json(out / "report.json", report);
  return report;
}

}  // namespace adlift
