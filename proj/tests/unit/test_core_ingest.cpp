#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "adlift/errors.hpp"
#include "adlift/ingest.hpp"
#include "adlift/simulate.hpp"

using namespace adlift;
namespace fs = std::filesystem;

namespace {

ExperimentDataset ten_users() {
  std::vector<testutil::Row> rows;
  testutil::add(rows, 1, 1, 1, 3);
  testutil::add(rows, 1, 0, 0, 3);
  testutil::add(rows, 0, 0, 0, 4);
  return testutil::rows_dataset(rows);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "adlift_unit";
  fs::create_directories(dir);
  return dir / name;
}

// Two-sided exact binomial p-value by enumerating every outcome.
double brute_binomial(std::size_t k, std::size_t n, double p) {
  auto pmf = [&](std::size_t j) {
    double c = 1.0;
    for (std::size_t i = 0; i < j; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c * std::pow(p, static_cast<double>(j)) * std::pow(1 - p, static_cast<double>(n - j));
  };
  const double observed = pmf(k);
  double total = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double q = pmf(j);
    if (q <= observed * (1 + 1e-7)) total += q;
  }
  return std::min(1.0, total);
}

}  // namespace

TEST_CASE("well-formed dataset validates cleanly") {
  const auto ds = ten_users();
  CHECK(validate_dataset(ds).ok());
}

TEST_CASE("control-exposed row is reported once") {
  auto ds = ten_users();
  ds.users[9].w = 1;
  const auto rep = validate_dataset(ds);
  CHECK(rep.violations.size() == 1);
  CHECK(rep.count(ViolationKind::kControlExposed) == 1);
}

TEST_CASE("duplicate user id is reported once") {
  auto ds = ten_users();
  ds.users[4].user_id = ds.users[2].user_id;
  const auto rep = validate_dataset(ds);
  CHECK(rep.violations.size() == 1);
  CHECK(rep.count(ViolationKind::kDuplicateId) == 1);
}

TEST_CASE("non-binary values, ragged dense rows and bad sparse indices are all reported") {
  auto ds = ten_users();
  ds.schema.dense_names = {"a"};
  ds.schema.sparse_vocab = 3;
  for (auto& u : ds.users) u.dense = {0.0};
  ds.users[0].y["conv"] = 2;
  ds.users[1].dense = {0.0, 1.0};
  ds.users[2].sparse = {5};
  ds.users[3].y.clear();
  const auto rep = validate_dataset(ds);
  CHECK(rep.count(ViolationKind::kNonBinary) == 1);
  CHECK(rep.count(ViolationKind::kRaggedDense) == 1);
  CHECK(rep.count(ViolationKind::kSparseOutOfRange) == 1);
  CHECK(rep.count(ViolationKind::kMissingOutcome) == 1);
  CHECK_FALSE(rep.summary().empty());
}

TEST_CASE("validation is pure and repeatable") {
  auto ds = ten_users();
  ds.users[9].w = 1;
  ds.users[1].user_id = "u0";
  const auto before = ds;
  const auto a = validate_dataset(ds);
  const auto b = validate_dataset(ds);
  CHECK(ds == before);
  REQUIRE(a.violations.size() == b.violations.size());
  for (std::size_t i = 0; i < a.violations.size(); ++i) {
    CHECK(a.violations[i].kind == b.violations[i].kind);
    CHECK(a.violations[i].row == b.violations[i].row);
    CHECK(a.violations[i].message == b.violations[i].message);
  }
}

TEST_CASE("outcome columns reject a missing event") {
  const auto ds = ten_users();
  CHECK(outcome_columns(ds, "conv").size() == 10);
  CHECK_THROWS_AS(outcome_columns(ds, "nope"), DataError);
  CHECK(test_group(ds).size() == 6);
}

TEST_CASE("names round-trip through strings") {
  for (Funnel f : {Funnel::kUpper, Funnel::kMid, Funnel::kLower}) CHECK(funnel_from_string(to_string(f)) == f);
  for (Method m : {Method::kRctItt, Method::kRctAtt, Method::kExposedUnexposed, Method::kSpsm, Method::kDml}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK(method_from_string("eu") == Method::kExposedUnexposed);
}

TEST_CASE("three-row JSONL fixture loads") {
  const fs::path p = fs::path(ADLIFT_TEST_DATA) / "three_users.jsonl";
  const auto ds = load_dataset(p, format_from_path(p));
  CHECK(ds.size() == 3);
  CHECK(ds.users[0].user_id == "a");
  CHECK(ds.users[0].sparse == std::vector<int>{1, 3});
  CHECK(ds.users[1].dense == std::vector<double>{1.5, 0.25});
  CHECK(ds.meta.experiment_id == "fixture");
  CHECK(ds.meta.outcome_events.front().funnel == Funnel::kLower);
  CHECK(ds.schema.dense_names == std::vector<std::string>{"age", "income"});
}

TEST_CASE("CSV with a header mismatch names the missing column") {
  const fs::path p = fs::path(ADLIFT_TEST_DATA) / "bad_header.csv";
  try {
    (void)load_dataset(p, DataFormat::kCsv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("missing column 'w'") != std::string::npos);
    CHECK(e.line() == 1);
  }
}

TEST_CASE("malformed JSONL reports the line number") {
  const auto p = scratch("broken.jsonl");
  fs::copy_file(fs::path(ADLIFT_TEST_DATA) / "three_users.meta.json", sidecar_path(p),
                fs::copy_options::overwrite_existing);
  std::ofstream(p) << R"({"user_id":"a","z":1,"w":1,"y":{"purchase":1}})" << "\n{not json\n";
  try {
    (void)load_dataset(p, DataFormat::kJsonl);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("invalid rows abort loading with the validation report") {
  const auto p = scratch("invalid.jsonl");
  fs::copy_file(fs::path(ADLIFT_TEST_DATA) / "three_users.meta.json", sidecar_path(p),
                fs::copy_options::overwrite_existing);
  std::ofstream(p) << R"({"user_id":"a","z":0,"w":1,"y":{"purchase":1},"dense":[0,0]})" << "\n"
                   << R"({"user_id":"b","z":1,"w":0,"y":{"purchase":0},"dense":[0,0]})" << "\n";
  CHECK_THROWS_WITH_AS((void)load_dataset(p, DataFormat::kJsonl), doctest::Contains("control"), DataError);
}

TEST_CASE("simulator output round-trips through JSONL and CSV") {
  SimConfig cfg;
  cfg.n_users = 300;
  cfg.seed = 11;
  const auto ds = simulate_experiment(cfg).dataset;
  const auto pj = scratch("sim.jsonl");
  write_dataset(ds, pj, DataFormat::kJsonl);
  CHECK(load_dataset(pj, DataFormat::kJsonl) == ds);

  const auto pc = scratch("sim.csv");
  write_dataset(ds, pc, DataFormat::kCsv);
  CHECK(load_dataset(pc, DataFormat::kCsv) == ds);
}

TEST_CASE("format is inferred from the extension") {
  CHECK(format_from_path("x.jsonl") == DataFormat::kJsonl);
  CHECK(format_from_path("x.csv") == DataFormat::kCsv);
  CHECK_THROWS_AS(format_from_path("x.parquet"), ConfigError);
  CHECK(sidecar_path("dir/x.jsonl") == fs::path("dir/x.meta.json"));
}

TEST_CASE("exact binomial test") {
  CHECK(binomial_test_exact(5, 10, 0.5) == doctest::Approx(1.0));
  CHECK(binomial_test_exact(10, 10, 0.5) == doctest::Approx(2 * std::pow(0.5, 10)).epsilon(1e-12));
  CHECK(binomial_test(900'000, 1'000'000, 0.9) == doctest::Approx(1.0).epsilon(1e-3));

  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng() % 60;
    const std::size_t k = rng() % (n + 1);
    const double p = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    CHECK(binomial_test_exact(k, n, p) == doctest::Approx(brute_binomial(k, n, p)).epsilon(1e-9));
  }
}

TEST_CASE("exact and normal branches agree at the cutoff for an even split") {
  // With an uneven split the exact test is asymmetric and the gap reaches
  // about 0.013 at p = 0.9; the symmetric normal tail cannot follow it.
  const std::size_t n = kExactBinomialMaxN;
  for (double p : {0.5}) {
    const double mu = p * static_cast<double>(n), sd = std::sqrt(mu * (1 - p));
    for (double dz = -3.0; dz <= 3.0; dz += 0.25) {
      const auto k = static_cast<std::size_t>(std::llround(mu + dz * sd));
      CHECK(std::abs(binomial_test_exact(k, n, p) - binomial_test_normal(k, n, p)) < 0.005);
    }
  }
}

TEST_CASE("randomization check on a dataset") {
  auto ds = ten_users();  // 6 test of 10
  const auto rc = randomization_check(ds);
  CHECK(rc.n_test == 6);
  CHECK(rc.n_total == 10);
  CHECK(rc.p_value == doctest::Approx(brute_binomial(6, 10, 0.5)));
  ds.meta.planned_split = 1.0;
  CHECK_THROWS_AS(randomization_check(ds), ConfigError);
}

TEST_CASE("p-value uniformity fractions") {
  const std::vector<double> v = {0.01, 0.5, 0.9, 0.99};
  const auto f = pvalue_uniformity(v);
  CHECK(f.below_05 == doctest::Approx(0.25));
  CHECK(f.below_25 == doctest::Approx(0.25));
  // Strictly below 0.75: only 0.01 and 0.5.
  CHECK(f.below_75 == doctest::Approx(0.5));

  const std::vector<double> ones(7, 1.0);
  const auto g = pvalue_uniformity(ones);
  CHECK(g.below_05 == 0.0);
  CHECK(g.below_25 == 0.0);
  CHECK(g.below_75 == 0.0);

  CHECK_THROWS(pvalue_uniformity(std::vector<double>{}));
  CHECK_THROWS(pvalue_uniformity(std::vector<double>{1.5}));
}
