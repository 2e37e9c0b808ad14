// adlift command-line entry point.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adlift/errors.hpp"
#include "adlift/ingest.hpp"
#include "adlift/pipeline.hpp"
#include "adlift/seeding.hpp"

namespace fs = std::filesystem;
using namespace adlift;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool config_required = false) {
  auto* opt = app->add_option("--config", c.config, "JSON config file");
  if (config_required) opt->required();
  app->add_option("--out", c.out, "Output path")->required();
  app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "Seed override");
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  try {
    return read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentDataset load(const std::string& data, const std::string& meta) {
  std::optional<fs::path> m;
  if (!meta.empty()) m = meta;
  return load_dataset(data, format_from_path(data), m);
}

std::vector<std::string> events_of(const ExperimentDataset& ds, const std::string& only) {
  std::vector<std::string> out;
  for (const auto& e : ds.meta.outcome_events) {
    if (only.empty() || only == e.name) out.push_back(e.name);
  }
  if (out.empty()) throw DataError("no outcome event named '" + only + "'");
  return out;
}

Json stamped(Json j, const Json& cfg, std::uint64_t seed) {
  j["config_hash"] = config_hash(cfg);
  j["seed"] = seed;
  return j;
}

void cmd_simulate(const Common& c) {
  Json cfg_j = load_config(c.config);
  SimConfig cfg = sim_config_from_json(cfg_j);
  if (c.seed) cfg.seed = *c.seed;
  const auto sim = simulate_experiment(cfg);
  const auto ds = observed_view(sim.dataset, sim.truth);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_dataset(ds, dir / (cfg.experiment_id + ".jsonl"), DataFormat::kJsonl);
  write_json(dir / (cfg.experiment_id + ".truth.json"), stamped(to_json(sim.truth), to_json(cfg), cfg.seed));
  std::cout << "wrote " << ds.size() << " users to " << (dir / (cfg.experiment_id + ".jsonl")).string() << '\n';
}

void cmd_analyze_rct(const Common& c, const std::string& data, const std::string& meta,
                     const std::string& event, std::size_t replicates) {
  Json cfg = load_config(c.config);
  const std::uint64_t seed = c.seed.value_or(1);
  const auto ds = load(data, meta);
  Json results = Json::array();
  for (const auto& ev : events_of(ds, event)) {
    const auto r = analyze_rct(ds, ev, replicates, derive_seed(seed, "rct/" + ds.meta.experiment_id + "/" + ev));
    results.push_back(to_json(r));
  }
  Json params = {{"config", cfg}, {"replicates", replicates}};
  write_json(c.out, stamped({{"results", results}}, params, seed));
}

void cmd_analyze_obs(const Common& c, const std::string& data, const std::string& meta,
                     const std::string& event, const std::string& method_name,
                     std::optional<int> strata, std::optional<std::string> variant, std::optional<int> folds) {
  Json cfg = load_config(c.config);
  if (strata) cfg["strata"] = *strata;
  if (variant) cfg["dml_variant"] = *variant;
  if (folds) cfg["folds"] = *folds;
  const ObsOptions opt = obs_options_from_json(cfg);
  const Method method = method_from_string(method_name);
  if (method != Method::kExposedUnexposed && method != Method::kSpsm && method != Method::kDml) {
    throw ConfigError("--method must be eu, spsm or dml");
  }
  const std::uint64_t seed = c.seed.value_or(1);
  const auto ds = load(data, meta);
  const auto tg = test_group(ds);
  Json results = Json::array();
  for (const auto& ev : events_of(ds, event)) {
    const std::string tag = ds.meta.experiment_id + "/" + ev;
    std::optional<CrossFitPredictions> cf;
    if (method != Method::kExposedUnexposed) {
      cf = crossfit(opt.propensity, opt.outcome, tg, ev, opt.folds, derive_seed(seed, "crossfit/" + tag));
    }
    const auto a = analyze_obs(ds, ev, method, opt, cf ? &*cf : nullptr,
                               derive_seed(seed, "obs/" + tag + "/" + std::string(to_string(method))));
    results.push_back({{"experiment_id", ds.meta.experiment_id},
                       {"event", ev},
                       {"estimate", to_json(a.estimate)},
                       {"diagnostics", a.diagnostics},
                       {"characteristics", experiment_characteristics(ds, ev, cf ? &*cf : nullptr,
                                                                      method == Method::kDml)}});
  }
  write_json(c.out, stamped({{"results", results}}, cfg, seed));
}

void cmd_evaluate(const Common& c, const std::vector<std::string>& rct_files,
                  const std::vector<std::string>& obs_files) {
  std::map<std::pair<std::string, std::string>, RctResult> rct;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& f : rct_files) {
    const Json doc = read_json(f);
    for (const auto& r : doc.at("results")) {
      auto res = rct_result_from_json(r);
      auto key = std::pair{res.experiment_id, res.event};
      if (!rct.count(key)) order.push_back(key);
      rct[key] = res;
    }
  }
  std::map<std::pair<std::string, std::string>, std::map<std::string, EffectEstimate>> obs;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> chars;
  for (const auto& f : obs_files) {
    const Json doc = read_json(f);
    for (const auto& r : doc.at("results")) {
      auto key = std::pair{r.at("experiment_id").get<std::string>(), r.at("event").get<std::string>()};
      auto e = effect_from_json(r.at("estimate"));
      obs[key][std::string(to_string(e.method))] = e;
      if (r.contains("characteristics")) {
        for (const auto& [k, v] : r.at("characteristics").items()) {
          if (!v.is_null()) chars[key][k] = v.get<double>();
        }
      }
    }
  }
  std::vector<EvaluationRecord> records;
  for (const auto& key : order) records.push_back(make_record(rct.at(key), obs[key], chars[key]));
  std::string tables;
  Json summary = evaluation_summary(records, &tables);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  Json params = {{"rct", rct_files}, {"obs", obs_files}};
  const std::uint64_t seed = c.seed.value_or(0);
  std::ofstream rec_out(dir / "records.jsonl");
  for (const auto& r : records) rec_out << stamped(to_json(r), params, seed).dump() << '\n';
  write_json(dir / "summary.json", stamped(summary, params, seed));
  std::ofstream(dir / "tables.txt") << tables;
  std::cout << tables;
}

void cmd_meta(const Common& c, const std::string& records_path) {
  Json cfg = load_config(c.config);
  ForestParams p = forest_params_from_json(cfg);
  if (c.seed) p.seed = *c.seed;
  std::ifstream in(records_path);
  if (!in) throw DataError("cannot open " + records_path);
  std::vector<EvaluationRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(records_path, lineno, e.what());
    }
  }
  const auto meta = run_meta(records, p, c.jobs);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  Json all = Json::array();
  for (const auto& m : meta) {
    all.push_back(to_json(m));
    for (const auto& pd : m.pdp) {
      std::ofstream(dir / ("pdp_" + m.method + "_" + pd.feature + ".csv")) << pdp_csv(pd);
    }
    if (m.skipped) std::cerr << m.method << ": skipped (" << *m.skipped << ")\n";
  }
  write_json(dir / "importance.json", stamped({{"methods", all}}, to_json(p), p.seed));
}

void cmd_pipeline(const Common& c) {
  RunConfig cfg = run_config_from_json(load_config(c.config));
  if (c.seed) cfg.master_seed = *c.seed;
  cfg.jobs = c.jobs;
  const Json report = run_pipeline(cfg, c.out);
  std::cout << "report: " << (fs::path(c.out) / "report.json").string() << " (config " << report.at("config_hash").get<std::string>()
            << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Advertising lift measurement: RCT, SPSM and DML estimators on simulated or loaded experiments"};
  app.require_subcommand(1);

  Common sim_c, rct_c, obs_c, eval_c, meta_c, pipe_c;
  std::string data, meta_path, event, method = "dml", records;
  std::size_t replicates = kDefaultBootstrapReplicates;
  std::optional<int> strata, folds;
  std::optional<std::string> variant;
  std::vector<std::string> rct_files, obs_files;

  auto* sim = app.add_subcommand("simulate", "Simulate an experiment; writes dataset, metadata and ground truth");
  add_common(sim, sim_c);

  auto* rct = app.add_subcommand("analyze-rct", "ITT, ATT and lift estimates per outcome event");
  add_common(rct, rct_c);
  rct->add_option("--data", data, "Dataset (.jsonl or .csv)")->required();
  rct->add_option("--meta", meta_path, "Metadata sidecar (default: next to the data)");
  rct->add_option("--event", event, "Only this outcome event");
  rct->add_option("--replicates", replicates, "Bootstrap replicates")->check(CLI::Range(50, 100000));

  auto* obs = app.add_subcommand("analyze-obs", "Observational estimate on the test group");
  add_common(obs, obs_c);
  obs->add_option("--data", data, "Dataset (.jsonl or .csv)")->required();
  obs->add_option("--meta", meta_path, "Metadata sidecar (default: next to the data)");
  obs->add_option("--event", event, "Only this outcome event");
  obs->add_option("--method", method, "eu, spsm or dml")->check(CLI::IsMember({"eu", "spsm", "dml"}));
  obs->add_option("--strata", strata, "SPSM strata");
  obs->add_option("--dml-variant", variant, "g0 or gw")->check(CLI::IsMember({"g0", "gw"}));
  obs->add_option("--folds", folds, "Cross-fitting folds");

  auto* ev = app.add_subcommand("evaluate", "Join RCT and observational results into evaluation records");
  add_common(ev, eval_c);
  ev->add_option("--rct", rct_files, "analyze-rct outputs")->required();
  ev->add_option("--obs", obs_files, "analyze-obs outputs")->required();

  auto* meta = app.add_subcommand("meta", "Random-forest importance and partial dependence of APE");
  add_common(meta, meta_c);
  meta->add_option("--records", records, "records.jsonl from evaluate")->required();

  auto* pipe = app.add_subcommand("pipeline", "Run every stage from a run config");
  add_common(pipe, pipe_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) cmd_simulate(sim_c);
    if (*rct) cmd_analyze_rct(rct_c, data, meta_path, event, replicates);
    if (*obs) cmd_analyze_obs(obs_c, data, meta_path, event, method, strata, variant, folds);
    if (*ev) cmd_evaluate(eval_c, rct_files, obs_files);
    if (*meta) cmd_meta(meta_c, records);
    if (*pipe) cmd_pipeline(pipe_c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
