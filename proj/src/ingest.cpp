#include "adlift/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "adlift/errors.hpp"
#include "adlift/serialize.hpp"

namespace adlift {

namespace fs = std::filesystem;
using nlohmann::json;

DataFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  if (ext == ".jsonl") return DataFormat::kJsonl;
  if (ext == ".csv") return DataFormat::kCsv;
  throw ConfigError("cannot infer data format from '" + path.string() +
                    "' (expected .jsonl or .csv)");
}

fs::path sidecar_path(const fs::path& data_path) {
  auto p = data_path;
  p.replace_extension(".meta.json");
  return p;
}

namespace {

struct Sidecar {
  ExperimentMeta meta;
  std::optional<FeatureSchema> schema;
};

Sidecar read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metadata sidecar '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  Sidecar s;
  try {
    s.meta = meta_from_json(j);
    if (j.contains("schema")) s.schema = schema_from_json(j.at("schema"));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return s;
}

void write_sidecar(const ExperimentDataset& ds, const fs::path& path,
                   const std::vector<OutcomeEvent>& events) {
  json j = to_json(ds.meta);
  j["outcome_events"] = json::array();
  for (const auto& e : events) {
    j["outcome_events"].push_back({{"name", e.name}, {"funnel", to_string(e.funnel)}});
  }
  j["schema"] = to_json(ds.schema);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line,
                    const std::string& column) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file, line, "column '" + column + "': not a number: '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& file, std::size_t line,
              const std::string& column) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file, line, "column '" + column + "': not an integer: '" + s + "'");
  }
}

FeatureSchema infer_schema(const std::vector<UserRecord>& users) {
  FeatureSchema schema;
  std::size_t dim = users.empty() ? 0 : users.front().dense.size();
  for (std::size_t j = 0; j < dim; ++j) schema.dense_names.push_back("d" + std::to_string(j));
  for (const auto& u : users) {
    for (int s : u.sparse) schema.sparse_vocab = std::max(schema.sparse_vocab, s + 1);
  }
  return schema;
}

ExperimentDataset load_jsonl(const fs::path& path, Sidecar sidecar) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  ExperimentDataset ds;
  ds.meta = std::move(sidecar.meta);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.users.push_back(user_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  ds.schema = sidecar.schema ? *sidecar.schema : infer_schema(ds.users);
  return ds;
}

constexpr const char* kCsvRequired[] = {"user_id", "z", "w", "y",
                                        "action_rate", "prior_outcome", "sparse"};

ExperimentDataset load_csv(const fs::path& path, Sidecar sidecar) {
  if (sidecar.meta.outcome_events.size() != 1) {
    throw DataError("CSV metadata must declare exactly one outcome event, got " +
                    std::to_string(sidecar.meta.outcome_events.size()));
  }
  const std::string event = sidecar.meta.outcome_events.front().name;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, "missing header row");
  auto header = split(line, ',');

  auto column_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(file, 1, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> req;
  for (const char* name : kCsvRequired) req.push_back(column_index(name));

  FeatureSchema schema;
  std::vector<std::size_t> dense_cols;
  if (sidecar.schema) {
    schema = *sidecar.schema;
    for (const auto& name : schema.dense_names) dense_cols.push_back(column_index(name));
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (std::find(std::begin(kCsvRequired), std::end(kCsvRequired), header[c]) ==
          std::end(kCsvRequired)) {
        schema.dense_names.push_back(header[c]);
        dense_cols.push_back(c);
      }
    }
  }

  ExperimentDataset ds;
  ds.meta = std::move(sidecar.meta);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError(file, lineno,
                       "expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()));
    }
    UserRecord u;
    u.user_id = cells[req[0]];
    u.z = parse_int(cells[req[1]], file, lineno, "z");
    u.w = parse_int(cells[req[2]], file, lineno, "w");
    u.y[event] = parse_int(cells[req[3]], file, lineno, "y");
    u.action_rate = parse_double(cells[req[4]], file, lineno, "action_rate");
    u.prior_outcome = parse_int(cells[req[5]], file, lineno, "prior_outcome");
    if (!cells[req[6]].empty()) {
      for (const auto& tok : split(cells[req[6]], ';')) {
        u.sparse.push_back(parse_int(tok, file, lineno, "sparse"));
      }
    }
    for (std::size_t j = 0; j < dense_cols.size(); ++j) {
      u.dense.push_back(parse_double(cells[dense_cols[j]], file, lineno,
                                     schema.dense_names[j]));
    }
    ds.users.push_back(std::move(u));
  }
  if (!sidecar.schema) {
    for (const auto& u : ds.users) {
      for (int s : u.sparse) schema.sparse_vocab = std::max(schema.sparse_vocab, s + 1);
    }
  }
  ds.schema = std::move(schema);
  return ds;
}

}  // namespace

ExperimentDataset load_dataset(const fs::path& path, DataFormat format,
                               const std::optional<fs::path>& meta_path) {
  Sidecar sidecar = read_sidecar(meta_path ? *meta_path : sidecar_path(path));
  ExperimentDataset ds = format == DataFormat::kJsonl ? load_jsonl(path, std::move(sidecar))
                                                      : load_csv(path, std::move(sidecar));
  auto report = validate_dataset(ds);
  if (!report.ok()) {
    throw DataError("dataset '" + path.string() + "' failed validation: " + report.summary());
  }
  return ds;
}

void write_dataset(const ExperimentDataset& ds, const fs::path& path, DataFormat format,
                   const std::optional<std::string>& event) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (format == DataFormat::kJsonl) {
    for (const auto& u : ds.users) out << to_json(u).dump() << '\n';
    write_sidecar(ds, sidecar_path(path), ds.meta.outcome_events);
    return;
  }

  if (ds.meta.outcome_events.empty() && !event) {
    throw DataError("CSV output needs an outcome event");
  }
  const std::string ev = event ? *event : ds.meta.outcome_events.front().name;
  const OutcomeEvent* declared = ds.meta.find_event(ev);
  OutcomeEvent oe = declared ? *declared : OutcomeEvent{ev, Funnel::kUpper};

  out << "user_id,z,w,y,action_rate,prior_outcome,sparse";
  for (const auto& name : ds.schema.dense_names) out << ',' << name;
  out << '\n';
  for (const auto& u : ds.users) {
    auto it = u.y.find(ev);
    if (it == u.y.end()) throw DataError("user '" + u.user_id + "' has no outcome '" + ev + "'");
    out << u.user_id << ',' << u.z << ',' << u.w << ',' << it->second << ','
        << fmt_double(u.action_rate) << ',' << u.prior_outcome << ',';
    for (std::size_t k = 0; k < u.sparse.size(); ++k) {
      if (k) out << ';';
      out << u.sparse[k];
    }
    for (double d : u.dense) out << ',' << fmt_double(d);
    out << '\n';
  }
  write_sidecar(ds, sidecar_path(path), {oe});
}

double binomial_test_exact(std::size_t k, std::size_t n, double p) {
  if (n == 0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  const double lnf = std::lgamma(static_cast<double>(n) + 1.0);
  auto log_pmf = [&](std::size_t i) {
    const double di = static_cast<double>(i), dn = static_cast<double>(n);
    return lnf - std::lgamma(di + 1.0) - std::lgamma(dn - di + 1.0) + di * lp + (dn - di) * lq;
  };
  // Relative slack so outcomes tied with the observed one count despite rounding.
  const double threshold = log_pmf(k) + 1e-7;
  double total = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double lpi = log_pmf(i);
    if (lpi <= threshold) total += std::exp(lpi);
  }
  return std::min(1.0, total);
}

double binomial_test_normal(std::size_t k, std::size_t n, double p) {
  if (n == 0) return 1.0;
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(mean * (1.0 - p));
  const double dev = std::abs(static_cast<double>(k) - mean);
  if (dev <= 0.5) return 1.0;
  const double z = (dev - 0.5) / sd;
  return std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

double binomial_test(std::size_t k, std::size_t n, double p) {
  return n <= kExactBinomialMaxN ? binomial_test_exact(k, n, p) : binomial_test_normal(k, n, p);
}

RandomizationCheck randomization_check(const ExperimentDataset& ds) {
  const double split = ds.meta.planned_split;
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("planned_split must lie in (0,1)");
  if (ds.users.empty()) throw DataError("randomization check needs at least one user");
  RandomizationCheck rc;
  rc.n_total = ds.users.size();
  for (const auto& u : ds.users) rc.n_test += u.z == 1;
  rc.planned_split = split;
  rc.p_value = binomial_test(rc.n_test, rc.n_total, split);
  return rc;
}

UniformityFractions pvalue_uniformity(std::span<const double> pvals) {
  if (pvals.empty()) throw DataError("p-value uniformity needs at least one p-value");
  std::size_t a = 0, b = 0, c = 0;
  for (double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("p-value outside [0,1]");
    a += p < 0.05;
    b += p < 0.25;
    c += p < 0.75;
  }
  const double n = static_cast<double>(pvals.size());
  return {a / n, b / n, c / n};
}

}  // namespace adlift
