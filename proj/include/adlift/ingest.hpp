#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "adlift/core_types.hpp"

namespace adlift {

enum class DataFormat { kJsonl, kCsv };

DataFormat format_from_path(const std::filesystem::path& path);

// Metadata sidecar for a data file: `exp.jsonl` -> `exp.meta.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

// Loads a dataset and its metadata sidecar (or `meta_path` if given). Throws
// ParseError with the offending line, or DataError carrying the validation
// summary when the parsed rows break a dataset invariant.
ExperimentDataset load_dataset(const std::filesystem::path& path, DataFormat format,
                               const std::optional<std::filesystem::path>& meta_path = {});

// Writes rows plus the metadata sidecar. JSONL keeps every outcome event;
// CSV holds exactly one, so `event` picks it (defaults to the first declared).
void write_dataset(const ExperimentDataset& ds, const std::filesystem::path& path,
                   DataFormat format, const std::optional<std::string>& event = {});

struct RandomizationCheck {
  std::size_t n_test = 0;
  std::size_t n_total = 0;
  double planned_split = 0.5;
  double p_value = 1.0;
};

// Sample sizes up to this use the exact test; larger ones the normal
// approximation with continuity correction.
inline constexpr std::size_t kExactBinomialMaxN = 10'000;

// Two-sided exact binomial test, summing the probabilities of all outcomes
// no more likely than the observed one.
double binomial_test_exact(std::size_t k, std::size_t n, double p);
// Two-sided normal approximation with continuity correction.
double binomial_test_normal(std::size_t k, std::size_t n, double p);
double binomial_test(std::size_t k, std::size_t n, double p);

// Tests the realized test/control split against the planned split.
RandomizationCheck randomization_check(const ExperimentDataset& ds);

struct UniformityFractions {
  double below_05 = 0.0;
  double below_25 = 0.0;
  double below_75 = 0.0;
};

// Fractions of p-values strictly below 0.05, 0.25 and 0.75.
UniformityFractions pvalue_uniformity(std::span<const double> pvals);

}  // namespace adlift
