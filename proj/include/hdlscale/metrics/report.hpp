#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdlscale/metrics/metrics.hpp"

namespace hdlscale {

inline constexpr int kReportSchemaVersion = 1;

// Fixed float formatting keeps reports byte-identical across runs.
inline std::string format_rate(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_usd(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace detail {

inline void dump6(const nlohmann::json& j, int indent, int depth, std::string& out) {
  auto newline = [&](int d) {
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += nlohmann::json(it.key()).dump() + ": ";
        dump6(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        newline(depth + 1);
        dump6(j[i], indent, depth + 1, out);
      }
      newline(depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      std::string s = format_rate(v);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";  // stay a float
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

// Pretty JSON with doubles at 6 significant digits.
inline std::string dump_json6(const nlohmann::json& j, int indent = 2) {
  std::string out;
  detail::dump6(j, indent, 0, out);
  out += '\n';
  return out;
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + file.string());
}

// hit_curve.csv: schema_version,k,success_rate
inline std::string hit_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string s = "schema_version,k,success_rate\n";
  for (const auto& p : curve)
    s += std::to_string(kReportSchemaVersion) + "," + std::to_string(p.k) + "," +
         format_rate(p.success_rate) + "\n";
  return s;
}

// cost.csv: schema_version,model,problem_id,usd
inline std::string cost_csv(const CostReport& report, const std::string& model) {
  std::string s = "schema_version,model,problem_id,usd\n";
  for (const auto& [id, usd] : report.per_problem_usd)
    s += std::to_string(kReportSchemaVersion) + "," + model + "," + id + "," + format_usd(usd) + "\n";
  return s;
}

// by_tag.csv: schema_version,tag,k,tagged_rate,untagged_rate,tagged_problems,untagged_problems
inline std::string by_tag_csv(const std::vector<TagSplit>& splits) {
  std::string s = "schema_version,tag,k,tagged_rate,untagged_rate,tagged_problems,untagged_problems\n";
  for (const auto& split : splits)
    for (const auto& [k, rate] : split.tagged)
      s += std::to_string(kReportSchemaVersion) + "," + split.tag + "," + std::to_string(k) + "," +
           format_rate(rate) + "," + format_rate(split.untagged.at(k)) + "," +
           std::to_string(split.tagged_problems) + "," + std::to_string(split.untagged_problems) +
           "\n";
  return s;
}

inline nlohmann::json fit_json(const std::vector<CurvePoint>& curve) {
  nlohmann::json j{{"schema_version", kReportSchemaVersion}, {"model", "a + b*ln(ln(k))"}};
  try {
    LogLogFit fit = fit_loglog(curve);
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["rmse"] = fit.rmse;
    j["points"] = fit.points;
  } catch (const Error& e) {
    j["error"] = std::string(to_string(e.code()));
    j["points"] = 0;
  }
  return j;
}

// ---- model x suite cost grid ----

struct CostCell {
  std::string model;
  std::string suite;
  double mean_usd = 0.0;
};

namespace detail {

struct Grid {
  std::vector<std::string> models, suites;
  std::map<std::pair<std::string, std::string>, double> cells;
};

inline Grid make_grid(const std::vector<CostCell>& cells) {
  Grid g;
  for (const auto& c : cells) {
    if (std::find(g.models.begin(), g.models.end(), c.model) == g.models.end()) g.models.push_back(c.model);
    if (std::find(g.suites.begin(), g.suites.end(), c.suite) == g.suites.end()) g.suites.push_back(c.suite);
    g.cells[{c.model, c.suite}] = c.mean_usd;
  }
  return g;
}

inline std::string usd2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// Rows are models, columns suites, both in first-appearance order; cells are
// mean USD per problem at 2 decimals, "-" where absent.
inline std::vector<std::vector<std::string>> cost_grid_rows(const std::vector<CostCell>& cells) {
  detail::Grid g = detail::make_grid(cells);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{""};
  header.insert(header.end(), g.suites.begin(), g.suites.end());
  rows.push_back(header);
  for (const auto& m : g.models) {
    std::vector<std::string> row{m};
    for (const auto& s : g.suites) {
      auto it = g.cells.find({m, s});
      row.push_back(it == g.cells.end() ? "-" : detail::usd2(it->second));
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_cost_grid(const std::vector<CostCell>& cells) {
  auto rows = cost_grid_rows(cells);
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], row[i].size());
    }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const std::string& cell = rows[r][i];
      if (i > 0) out += " | ";
      // names left-aligned, numbers right-aligned
      if (i == 0) out += cell + std::string(width[i] - cell.size(), ' ');
      else out += std::string(width[i] - cell.size(), ' ') + cell;
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 3 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

// ---- whole report ----

struct ReportOptions {
  std::vector<int> checkpoints = {1, 10, 512};
  std::optional<double> discount_factor;  // default: campaign setting
  std::optional<int> normalize_samples;   // default: campaign setting
};

struct ReportResult {
  std::vector<CurvePoint> curve;
  std::map<int, double> hit_at_checkpoints;
  std::optional<CostReport> cost;
  std::vector<std::string> notices;
  std::string summary_text;
};

inline std::string suite_label(const StoreSnapshot& snap) {
  std::set<std::string> suites;
  for (const auto& p : snap.problems) suites.insert(p.suite.empty() ? "suite" : p.suite);
  std::string label;
  for (const auto& s : suites) label += (label.empty() ? "" : "+") + s;
  return label;
}

// Writes hit_curve.csv, by_tag.csv, fit.json, summary.json and, when the
// campaign has pricing for its model, cost.csv into `dir`.
inline ReportResult write_report(const StoreSnapshot& snap, const std::filesystem::path& dir,
                                 const ReportOptions& opts) {
  ReportResult res;
  res.curve = first_pass_curve(snap);  // throws EmptyStore
  const auto outs = outcomes(snap);
  for (int k : opts.checkpoints) res.hit_at_checkpoints[k] = hit_at_k(outs, k);

  write_text(dir / "hit_curve.csv", hit_curve_csv(res.curve));

  std::set<std::string> tags;
  for (const auto& p : snap.problems) tags.insert(p.tags.begin(), p.tags.end());
  std::vector<TagSplit> splits;
  for (const auto& t : tags) splits.push_back(success_by_tag(snap, t, opts.checkpoints));
  write_text(dir / "by_tag.csv", by_tag_csv(splits));

  nlohmann::json fit = fit_json(res.curve);
  write_text(dir / "fit.json", dump_json6(fit));

  const std::string& model = snap.config.params.model_id;
  const double discount = opts.discount_factor.value_or(snap.config.report.discount_factor);
  const int normalize = opts.normalize_samples.value_or(snap.config.report.normalize_samples);
  if (snap.config.pricing.count(model)) {
    res.cost = cost_report(snap, snap.config.pricing, discount, normalize);
    write_text(dir / "cost.csv", cost_csv(*res.cost, model));
  } else {
    std::error_code ec;
    std::filesystem::remove(dir / "cost.csv", ec);
    res.notices.push_back("no pricing for model '" + model + "'; cost report skipped");
  }

  std::size_t total_samples = 0;
  for (const auto& o : outs) total_samples += static_cast<std::size_t>(o.samples_done);
  nlohmann::json summary{{"schema_version", kReportSchemaVersion},
                         {"model", model},
                         {"suite", suite_label(snap)},
                         {"stop_mode", std::string(to_string(snap.config.mode()))},
                         {"max_samples", snap.config.samples_cap()},
                         {"temperature", snap.config.params.temperature},
                         {"problems", snap.problems.size()},
                         {"samples", total_samples}};
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, rate] : res.hit_at_checkpoints) hits[std::to_string(k)] = rate;
  summary["hit_at_k"] = hits;
  if (snap.config.mode() == StopMode::FixedN) {
    int min_n = INT_MAX;
    for (const auto& o : outs) min_n = std::min(min_n, o.samples_done);
    nlohmann::json pk = nlohmann::json::object();
    for (int k : opts.checkpoints)
      if (k <= min_n) pk[std::to_string(k)] = pass_at_k_suite(snap, k);
    summary["pass_at_k"] = pk;
  }
  if (res.cost) {
    summary["cost"] = {{"mean_usd", res.cost->mean_usd},
                       {"discount_factor", discount},
                       {"normalized_samples", normalize}};
  }
  summary["fit"] = fit;
  write_text(dir / "summary.json", dump_json6(summary));

  std::ostringstream text;
  text << "model " << model << "  suite " << suite_label(snap) << "  mode "
       << to_string(snap.config.mode()) << "\n";
  text << "problems " << snap.problems.size() << "  samples " << total_samples << "\n";
  for (const auto& [k, rate] : res.hit_at_checkpoints)
    text << "  hit@" << k << " = " << format_rate(rate) << "\n";
  if (fit.contains("a"))
    text << "  fit a=" << format_rate(fit["a"].get<double>()) << " b=" << format_rate(fit["b"].get<double>())
         << " rmse=" << format_rate(fit["rmse"].get<double>()) << "\n";
  if (res.cost) text << format_cost_grid({{model, suite_label(snap), res.cost->mean_usd}});
  res.summary_text = text.str();
  return res;
}

}  // namespace hdlscale
