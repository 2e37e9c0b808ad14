#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adlift/evalmetrics.hpp"
#include "adlift/meta.hpp"
#include "adlift/models.hpp"
#include "adlift/obs.hpp"
#include "adlift/rct.hpp"
#include "adlift/serialize.hpp"
#include "adlift/simulate.hpp"

namespace adlift {

struct ObsOptions {
  ModelSpec propensity;
  ModelSpec outcome;
  int folds = 5;
  int strata = kDefaultStrata;
  DmlVariant dml_variant = DmlVariant::kG0;
  SpsmVariance spsm_variance = SpsmVariance::kCorrected;
  std::size_t bootstrap = 100;  // lift-SE replicates; 0 disables
};

// Settings for a full simulate -> analyze -> evaluate -> meta run.
struct RunConfig {
  std::uint64_t master_seed = 1;
  // Explicit experiments; when empty a suite of `suite_size` experiments
  // with `suite_users` users each is drawn from master_seed.
  std::vector<SimConfig> experiments;
  std::size_t suite_size = 12;
  std::size_t suite_users = 10'000;
  ObsOptions obs;
  std::size_t rct_bootstrap = kDefaultBootstrapReplicates;
  bool run_meta = true;
  ForestParams forest;
  std::size_t jobs = 1;  // not part of the config hash
};

// Throws ConfigError on unknown keys, bad types or invalid values.
RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& c);
ObsOptions obs_options_from_json(const Json& j);

// Hex digest of the canonical config JSON, excluding `jobs`.
std::string config_hash(const RunConfig& c);
std::string config_hash(const Json& canonical);

// The experiment suite a config expands to, with seeds derived from
// master_seed.
std::vector<SimConfig> expand_experiments(const RunConfig& c);

// Experiment characteristics used by the meta analysis. `cf` supplies the
// propensity AUC (and the outcome AUC when `with_outcome_auc`).
std::map<std::string, double> experiment_characteristics(const ExperimentDataset& full,
                                                         const std::string& event,
                                                         const CrossFitPredictions* cf,
                                                         bool with_outcome_auc);

struct ObsAnalysis {
  EffectEstimate estimate;
  Json diagnostics;
};

// Runs one observational method on the test group of `full`. `cf` must be
// given for SPSM and DML.
ObsAnalysis analyze_obs(const ExperimentDataset& full, const std::string& event, Method method,
                        const ObsOptions& opt, const CrossFitPredictions* cf, std::uint64_t seed);

// Builds and scores an evaluation record from an RCT result and
// observational estimates keyed by method name.
EvaluationRecord make_record(const RctResult& rct, const std::map<std::string, EffectEstimate>& obs,
                             std::map<std::string, double> characteristics);

// Evaluation summaries of scored records (deciles are assigned in place).
Json evaluation_summary(std::vector<EvaluationRecord>& records, std::string* tables_text = nullptr);

struct MetaResult {
  std::string method;
  std::optional<std::string> skipped;  // reason, when the forest was not fit
  ImportanceReport importance;
  std::vector<PartialDependence> pdp;
};

// Fits one forest per compared method on record characteristics with APE as
// the target.
std::vector<MetaResult> run_meta(const std::vector<EvaluationRecord>& records, const ForestParams& p,
                                 std::size_t jobs);
Json to_json(const MetaResult& m);
std::string pdp_csv(const PartialDependence& pd);

// Runs every stage, writing artifacts under `out` and returning the report
// body that is also written to out/report.json.
Json run_pipeline(const RunConfig& cfg, const std::filesystem::path& out);

// Writes `j` followed by a newline, creating parent directories.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);  // throws DataError / ConfigError

}  // namespace adlift
