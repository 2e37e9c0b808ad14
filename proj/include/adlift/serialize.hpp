#pragma once

#include <vector>

#include "json.hpp"

#include "adlift/core_types.hpp"
#include "adlift/evalmetrics.hpp"
#include "adlift/meta.hpp"
#include "adlift/models.hpp"
#include "adlift/obs.hpp"
#include "adlift/rct.hpp"
#include "adlift/simulate.hpp"

namespace adlift {

using Json = nlohmann::json;

// Optional values are written as null. Non-finite doubles are written as
// null as well.
Json to_json(const UserRecord& u);
Json to_json(const FeatureSchema& s);
Json to_json(const ExperimentMeta& m);
Json to_json(const SimConfig& c);
Json to_json(const GroundTruth& g);  // summary only, no per-user vectors
Json to_json(const ModelSpec& s);
Json to_json(const EffectEstimate& e);
Json to_json(const RctResult& r);
Json to_json(const Stratification& s);  // diagnostics: counts and dropped strata
Json to_json(const CrossFitPredictions& cf);  // diagnostics: AUCs and fold sizes
Json to_json(const EvaluationRecord& r);
Json to_json(const SignificanceTable& t);
Json to_json(const std::vector<DecileSummary>& d);
Json to_json(const std::vector<ImprovementRow>& rows);
Json to_json(const ForestParams& p);
Json to_json(const ImportanceReport& r);
Json to_json(const PartialDependence& pd);

// Data readers throw DataError on malformed input.
UserRecord user_from_json(const Json& j);
FeatureSchema schema_from_json(const Json& j);
ExperimentMeta meta_from_json(const Json& j);
EffectEstimate effect_from_json(const Json& j);
RctResult rct_result_from_json(const Json& j);
EvaluationRecord record_from_json(const Json& j);

// Config readers throw ConfigError on unknown keys or wrong types. Missing
// keys keep their defaults.
SimConfig sim_config_from_json(const Json& j);
ModelSpec model_spec_from_json(const Json& j);
ForestParams forest_params_from_json(const Json& j);

}  // namespace adlift
