#include "adlift/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "adlift/errors.hpp"
#include "adlift/stats.hpp"

namespace adlift {

std::optional<double> ape(double lift_m, double lift_rct) {
  if (!(lift_rct > 0.0)) return std::nullopt;
  return std::abs((lift_m - lift_rct) / lift_rct);
}

double ae(double lift_m, double lift_rct) { return std::abs(lift_m - lift_rct); }

std::optional<double> rpb(double ape_eu, double ape_m) {
  if (ape_eu == 0.0) return std::nullopt;
  return 100.0 * (ape_m / ape_eu);
}

std::vector<double> winsorize(std::span<const double> values, std::span<const Funnel> groups,
                              double upper_pct) {
  if (values.size() != groups.size()) throw DataError("winsorize: values and groups differ in length");
  std::vector<double> out(values.begin(), values.end());
  for (Funnel f : {Funnel::kUpper, Funnel::kMid, Funnel::kLower}) {
    std::vector<double> group;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (groups[i] == f) group.push_back(values[i]);
    }
    if (group.empty()) continue;
    std::sort(group.begin(), group.end());
    const double cap = nearest_rank(group, upper_pct);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (groups[i] == f && out[i] > cap) out[i] = cap;
    }
  }
  return out;
}

std::vector<double> winsorize(std::span<const double> values, double upper_pct) {
  std::vector<Funnel> groups(values.size(), Funnel::kUpper);
  return winsorize(values, groups, upper_pct);
}

std::vector<int> assign_deciles(std::span<const double> lifts, std::span<const Funnel> funnels) {
  if (lifts.size() != funnels.size()) throw DataError("assign_deciles: length mismatch");
  std::vector<int> decile(lifts.size(), 0);
  for (Funnel f : {Funnel::kUpper, Funnel::kMid, Funnel::kLower}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < lifts.size(); ++i) {
      if (funnels[i] == f) idx.push_back(i);
    }
    if (idx.empty()) continue;
    if (idx.size() < 10) {
      throw DataError("deciles need at least 10 items per funnel; '" + std::string(to_string(f)) +
                      "' has " + std::to_string(idx.size()));
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return lifts[a] < lifts[b]; });
    const std::size_t n = idx.size();
    for (std::size_t r = 0; r < n; ++r) decile[idx[r]] = static_cast<int>(r * 10 / n) + 1;
  }
  return decile;
}

std::optional<bool> lifts_differ(double lift_a, double se_a, double lift_b, double se_b) {
  const double se = std::sqrt(se_a * se_a + se_b * se_b);
  const double diff = lift_a - lift_b;
  if (!(se > 0.0)) {
    if (diff == 0.0) return false;
    return std::nullopt;
  }
  return normal_two_sided_p(diff / se) <= 0.05;
}

void score_record(EvaluationRecord& rec) {
  const std::string eu(to_string(Method::kExposedUnexposed));
  for (auto& [name, m] : rec.methods) {
    m.ape.reset();
    m.ae.reset();
    m.rpb.reset();
    m.diff_significant.reset();
    if (!m.lift || !rec.rct_lift) continue;
    m.ape = ape(*m.lift, *rec.rct_lift);
    m.ae = ae(*m.lift, *rec.rct_lift);
    if (m.lift_se && rec.rct_lift_se) {
      m.diff_significant = lifts_differ(*m.lift, *m.lift_se, *rec.rct_lift, *rec.rct_lift_se);
    }
  }
  auto base = rec.methods.find(eu);
  if (base == rec.methods.end() || !base->second.ape) return;
  for (auto& [name, m] : rec.methods) {
    if (m.ape) m.rpb = rpb(*base->second.ape, *m.ape);
  }
}

void assign_record_deciles(std::vector<EvaluationRecord>& records) {
  for (auto& r : records) r.decile = 0;
  for (Funnel f : {Funnel::kUpper, Funnel::kMid, Funnel::kLower}) {
    std::vector<std::size_t> idx;
    std::vector<double> lifts;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].funnel == f && records[i].rct_lift) {
        idx.push_back(i);
        lifts.push_back(*records[i].rct_lift);
      }
    }
    if (idx.size() < 10) continue;
    std::vector<Funnel> fs(idx.size(), f);
    auto dec = assign_deciles(lifts, fs);
    for (std::size_t k = 0; k < idx.size(); ++k) records[idx[k]].decile = dec[k];
  }
}

double SignificanceCell::percent_different() const {
  const std::size_t n = indistinguishable + different;
  return n ? 100.0 * static_cast<double>(different) / static_cast<double>(n) : 0.0;
}

SignificanceTable significance_table(const std::vector<EvaluationRecord>& records,
                                     std::span<const Method> methods) {
  SignificanceTable table;
  const std::vector<std::string> funnels = {"all", "upper", "mid", "lower"};
  for (const auto& f : funnels) {
    for (bool sig : {false, true}) {
      SignificanceRow row;
      row.funnel = f;
      row.rct_significant = sig;
      for (Method m : methods) row.by_method[std::string(to_string(m))] = {};
      table.rows.push_back(std::move(row));
    }
  }
  auto row_index = [](std::size_t funnel_idx, bool sig) { return 2 * funnel_idx + (sig ? 1 : 0); };
  for (const auto& rec : records) {
    bool any_excluded = false;
    for (Method m : methods) {
      const std::string name(to_string(m));
      auto it = rec.methods.find(name);
      if (it == rec.methods.end() || !it->second.diff_significant) {
        any_excluded = true;
        continue;
      }
      const bool diff = *it->second.diff_significant;
      const std::size_t fidx = 1 + static_cast<std::size_t>(rec.funnel);
      for (std::size_t target : {row_index(0, rec.rct_significant), row_index(fidx, rec.rct_significant)}) {
        auto& cell = table.rows[target].by_method[name];
        (diff ? cell.different : cell.indistinguishable)++;
      }
    }
    table.excluded += any_excluded;
  }
  return table;
}

namespace {

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  return median(std::move(v));
}

}  // namespace

std::vector<DecileSummary> decile_summary(const std::vector<EvaluationRecord>& records,
                                          std::span<const Method> methods) {
  std::vector<DecileSummary> out;
  for (Funnel f : {Funnel::kUpper, Funnel::kMid, Funnel::kLower}) {
    for (int d = 1; d <= 11; ++d) {
      const int decile = d == 11 ? 0 : d;  // 0 = funnel-wide row, emitted last
      DecileSummary row;
      row.funnel = std::string(to_string(f));
      row.decile = decile;
      std::vector<double> rct;
      std::map<std::string, std::vector<double>> apes, aes;
      for (const auto& rec : records) {
        if (rec.funnel != f || rec.decile == 0 || !rec.rct_lift) continue;
        if (decile != 0 && rec.decile != decile) continue;
        rct.push_back(*rec.rct_lift);
        for (Method m : methods) {
          const std::string name(to_string(m));
          auto it = rec.methods.find(name);
          if (it == rec.methods.end()) continue;
          if (it->second.ape) apes[name].push_back(*it->second.ape);
          if (it->second.ae) aes[name].push_back(*it->second.ae);
        }
      }
      if (rct.empty()) continue;
      row.n = rct.size();
      row.median_rct_lift = median(rct);
      for (Method m : methods) {
        const std::string name(to_string(m));
        row.median_ape[name] = median_of(apes[name]);
        row.median_ae[name] = median_of(aes[name]);
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<ImprovementRow> improvement_summary(const std::vector<EvaluationRecord>& records,
                                                std::span<const Method> methods) {
  std::vector<ImprovementRow> out;
  const std::vector<std::pair<std::string, std::optional<Funnel>>> groups = {
      {"all", std::nullopt}, {"upper", Funnel::kUpper}, {"mid", Funnel::kMid}, {"lower", Funnel::kLower}};
  for (const auto& [label, funnel] : groups) {
    for (Method m : methods) {
      const std::string name(to_string(m));
      ImprovementRow row;
      row.funnel = label;
      row.method = name;
      std::vector<double> rpbs;
      std::size_t improved = 0, le50 = 0, le20 = 0;
      for (const auto& rec : records) {
        if (funnel && rec.funnel != *funnel) continue;
        auto it = rec.methods.find(name);
        if (it == rec.methods.end() || !it->second.rpb) continue;
        const double r = *it->second.rpb;
        rpbs.push_back(r);
        improved += r < 100.0;
        le50 += r <= 50.0;
        le20 += r <= 20.0;
      }
      row.n = rpbs.size();
      if (row.n) {
        const double n = static_cast<double>(row.n);
        row.improved = improved / n;
        row.rpb_at_most_50 = le50 / n;
        row.rpb_at_most_20 = le20 / n;
      }
      row.median_rpb = median_of(rpbs);
      out.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

std::string cell(const std::optional<double>& v, const char* fmt = "%.3f") {
  if (!v) return "-";
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, *v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string render_tables(const SignificanceTable& sig, const std::vector<DecileSummary>& deciles,
                          const std::vector<ImprovementRow>& improvement) {
  std::ostringstream out;
  out << "Observational vs RCT lifts: statistically indistinguishable or different\n";
  if (!sig.rows.empty()) {
    out << pad("funnel", 8) << pad("rct p", 8);
    for (const auto& [name, c] : sig.rows.front().by_method) {
      out << pad(name + " p>.05", 16) << pad("p<=.05", 8) << pad("%sig", 8);
    }
    out << '\n';
    for (const auto& row : sig.rows) {
      out << pad(row.funnel, 8) << pad(row.rct_significant ? "<=.05" : ">.05", 8);
      for (const auto& [name, c] : row.by_method) {
        out << pad(std::to_string(c.indistinguishable), 16) << pad(std::to_string(c.different), 8)
            << pad(cell(c.percent_different(), "%.0f%%"), 8);
      }
      out << '\n';
    }
    out << "excluded records: " << sig.excluded << "\n";
  }

  out << "\nMedian APE / AE by RCT lift decile\n";
  if (!deciles.empty()) {
    out << pad("funnel", 8) << pad("decile", 8) << pad("n", 6) << pad("rct lift", 10);
    for (const auto& [name, v] : deciles.front().median_ape) {
      out << pad(name + " APE", 12) << pad(name + " AE", 12);
    }
    out << '\n';
    for (const auto& row : deciles) {
      out << pad(row.funnel, 8) << pad(row.decile ? std::to_string(row.decile) : "median", 8)
          << pad(std::to_string(row.n), 6) << pad(cell(row.median_rct_lift), 10);
      for (const auto& [name, v] : row.median_ape) {
        out << pad(cell(v), 12) << pad(cell(row.median_ae.at(name)), 12);
      }
      out << '\n';
    }
  }

  out << "\nImprovement over exposed-unexposed (remaining percentage bias)\n";
  out << pad("funnel", 8) << pad("method", 8) << pad("n", 6) << pad("improved", 10)
      << pad("RPB<=50", 10) << pad("RPB<=20", 10) << pad("med RPB", 10) << '\n';
  for (const auto& row : improvement) {
    out << pad(row.funnel, 8) << pad(row.method, 8) << pad(std::to_string(row.n), 6)
        << pad(cell(100 * row.improved, "%.1f%%"), 10) << pad(cell(100 * row.rpb_at_most_50, "%.1f%%"), 10)
        << pad(cell(100 * row.rpb_at_most_20, "%.1f%%"), 10) << pad(cell(row.median_rpb, "%.1f"), 10)
        << '\n';
  }
  return out.str();
}

}  // namespace adlift
