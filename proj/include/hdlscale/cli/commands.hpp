#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/config_file.hpp"
#include "hdlscale/core/suite.hpp"
#include "hdlscale/dispersion/dispersion.hpp"
#include "hdlscale/metrics/report.hpp"
#include "hdlscale/orchestrator/campaign.hpp"

namespace hdlscale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 2;

// Command-line values that take precedence over the config file.
struct Overrides {
  bool mock = false;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<int> max_samples;
  std::optional<StopMode> stop_mode;
  std::optional<double> temperature;
  std::optional<std::string> model;
  std::optional<fs::path> suite;
  std::optional<int> gen_concurrency;
  std::optional<int> sim_workers;
  std::optional<int> queue_capacity;
  std::optional<int> progress_interval_s;
  bool keep_failed = false;
};

inline CampaignConfig apply_overrides(CampaignConfig c, const Overrides& o) {
  if (o.mock) c.mock = true;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.max_samples) c.max_samples = *o.max_samples;
  if (o.stop_mode) c.stop_mode = *o.stop_mode;
  if (o.temperature) c.params.temperature = *o.temperature;
  if (o.model) c.params.model_id = *o.model;
  if (o.suite) c.suite_path = *o.suite;
  if (o.gen_concurrency) c.gen_concurrency = *o.gen_concurrency;
  if (o.sim_workers) c.sim_workers = *o.sim_workers;
  if (o.queue_capacity) c.queue_capacity = *o.queue_capacity;
  if (o.progress_interval_s) c.progress_interval_s = *o.progress_interval_s;
  if (o.keep_failed) c.debug_keep_failed = true;
  if (c.mock && c.params.model_id.empty()) c.params.model_id = "mock";
  return c;
}

inline std::string progress_line(const CampaignProgress& p) {
  return "[progress] terminal " + std::to_string(p.problems_terminal) + "/" +
         std::to_string(p.problems_total) + " issued " + std::to_string(p.samples_issued) +
         " samples " + std::to_string(p.samples_done) + " passes " + std::to_string(p.passes);
}

namespace detail {

struct Loaded {
  CampaignConfig config;
  toml::Table extra;
};

inline Loaded load(const fs::path& config_path, const Overrides& o, std::ostream& err) {
  Loaded l;
  l.config = apply_overrides(load_config_file(config_path, &l.extra), o);
  std::vector<std::string> warnings;
  l.config = validate_config(l.config, l.config.pricing, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return l;
}

inline void print_stats(std::ostream& out, const CampaignStore& store, const CampaignStats& st) {
  out << "store " << store.root().string() << ": persisted " << st.samples_persisted
      << " samples (" << st.overshoot << " overshoot), max in-flight " << st.max_gen_in_flight
      << ", max pending " << st.max_pending << ", wall " << st.wall.count() << " ms\n";
}

inline CampaignOptions progress_options(std::ostream& out, CampaignStats* stats, std::mutex* mu = nullptr,
                                        std::string prefix = {}) {
  CampaignOptions opts;
  opts.stats = stats;
  opts.on_progress = [&out, mu, prefix](const CampaignProgress& p) {
    std::unique_lock<std::mutex> lock;
    if (mu) lock = std::unique_lock<std::mutex>(*mu);
    out << prefix << progress_line(p) << std::endl;
  };
  return opts;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitFailed;
}

}  // namespace detail

inline int cmd_run(const fs::path& config_path, const Overrides& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto loaded = detail::load(config_path, o, err);
    const auto suite = load_suite(loaded.config.suite_path);
    CampaignStats stats;
    auto store = run_campaign(suite, loaded.config, detail::progress_options(out, &stats));
    detail::print_stats(out, store, stats);
    return kExitOk;
  });
}

inline int cmd_resume(const fs::path& store_dir, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    CampaignStats stats;
    auto store = resume_campaign(store_dir, detail::progress_options(out, &stats));
    detail::print_stats(out, store, stats);
    return kExitOk;
  });
}

struct ReportArgs {
  std::optional<std::vector<int>> checkpoints;
  std::optional<double> discount_factor;
  std::optional<int> normalize_samples;
  std::optional<fs::path> out_dir;  // default <store>/reports
};

inline ReportResult report_store(const fs::path& store_dir, const ReportArgs& a) {
  auto store = CampaignStore::open(store_dir);
  auto snap = store.snapshot();
  ReportOptions ro;
  ro.checkpoints = a.checkpoints.value_or(snap.config.report.checkpoints);
  std::sort(ro.checkpoints.begin(), ro.checkpoints.end());
  ro.discount_factor = a.discount_factor;
  ro.normalize_samples = a.normalize_samples;
  return write_report(snap, a.out_dir.value_or(store_dir / "reports"), ro);
}

inline int cmd_report(const fs::path& store_dir, const ReportArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto res = report_store(store_dir, a);
    for (const auto& n : res.notices) err << "notice: " << n << "\n";
    out << res.summary_text;
    return kExitOk;
  });
}

struct AnalyzeArgs {
  std::vector<std::string> problems;  // empty: all
  int ngram = kDefaultNgram;
  int k_clusters = 0;  // 0: default for the sample count
  std::uint64_t seed = 0;
  ScatterPopulation population = ScatterPopulation::All;
  std::string highlight_tag = "math";
  int bin_size = 15;
  std::optional<fs::path> out_dir;  // default <store>/analysis
};

namespace detail {

inline std::string heatmap_csv(const SimilarityMatrix& m, const std::vector<int>& sample_index) {
  std::string s = "schema_version,sample";
  for (int idx : sample_index) s += "," + std::to_string(idx);
  s += "\n";
  for (std::size_t i = 0; i < m.n; ++i) {
    s += std::to_string(kReportSchemaVersion) + "," + std::to_string(sample_index[i]);
    for (std::size_t j = 0; j < m.n; ++j) s += "," + format_rate(m.at(i, j));
    s += "\n";
  }
  return s;
}

}  // namespace detail

// Heatmaps per problem, scatter.csv and (when every problem has reference
// code) bins.csv. Returns warnings for skipped problems.
inline std::vector<std::string> analyze_store(const fs::path& store_dir, const AnalyzeArgs& a) {
  auto store = CampaignStore::open(store_dir);
  auto snap = store.snapshot();
  const fs::path dir = a.out_dir.value_or(store_dir / "analysis");
  std::vector<std::string> warnings;

  std::set<std::string> wanted(a.problems.begin(), a.problems.end());
  for (const auto& id : wanted)
    if (std::none_of(snap.problems.begin(), snap.problems.end(), [&](const Problem& p) { return p.id == id; }))
      throw Error(Errc::InvalidConfig, "unknown problem '" + id + "'");

  for (const auto& p : snap.problems) {
    if (!wanted.empty() && !wanted.count(p.id)) continue;
    std::vector<std::string> codes;
    std::vector<int> sample_index;
    for (const auto& s : snap.samples_of(p.id)) {
      if (!s.extracted_code) continue;
      if (a.population == ScatterPopulation::FailedOnly && s.verdict.passed()) continue;
      codes.push_back(*s.extracted_code);
      sample_index.push_back(s.index);
    }
    if (codes.size() < 2) {
      warnings.push_back(p.id + ": " + std::to_string(codes.size()) + " code(s), heatmap skipped");
      continue;
    }
    auto set = vectorize(codes, a.ngram, p.id);
    const int k = a.k_clusters > 0 ? a.k_clusters : default_cluster_count(codes.size());
    auto clusters = cluster_order(set, k, a.seed);
    for (const auto& w : clusters.warnings) warnings.push_back(p.id + ": " + w);
    auto matrix = similarity_matrix(set).permuted(clusters.permutation);
    std::vector<int> ordered_index, ordered_labels;
    for (auto pos : clusters.permutation) {
      ordered_index.push_back(sample_index[pos]);
      ordered_labels.push_back(clusters.labels[pos]);
    }
    write_text(dir / ("heatmap_" + p.id + ".csv"), detail::heatmap_csv(matrix, ordered_index));
    nlohmann::json meta{{"schema_version", kReportSchemaVersion},
                        {"problem_id", p.id},
                        {"population", std::string(to_string(a.population))},
                        {"ngram", a.ngram},
                        {"seed", a.seed},
                        {"k", clusters.k},
                        {"iterations", clusters.iterations},
                        {"permutation", clusters.permutation},
                        {"sample_index", ordered_index},
                        {"labels", ordered_labels},
                        {"mcd", mcd(set)}};
    write_text(dir / ("heatmap_" + p.id + ".json"), dump_json6(meta));
  }

  std::vector<std::string> scatter_warnings;
  auto rows = scatter_mcd(snap, a.population, a.ngram, a.highlight_tag, &scatter_warnings);
  std::string csv = "schema_version,problem_id,ref_token_count,mcd,codes,tagged,population\n";
  for (const auto& r : rows)
    csv += std::to_string(kReportSchemaVersion) + "," + r.problem_id + "," +
           (r.ref_token_count ? std::to_string(*r.ref_token_count) : "") + "," + format_rate(r.mcd) + "," +
           std::to_string(r.codes) + "," + (r.tagged ? "1" : "0") + "," + std::string(to_string(a.population)) +
           "\n";
  write_text(dir / "scatter.csv", csv);

  try {
    auto bins = bin_by_length(snap, a.bin_size, snap.config.report.checkpoints);
    std::string b = "schema_version,bin,min_tokens,max_tokens,problems,k,successes\n";
    for (std::size_t i = 0; i < bins.size(); ++i)
      for (const auto& [k, n] : bins[i].successes)
        b += std::to_string(kReportSchemaVersion) + "," + std::to_string(i) + "," +
             std::to_string(bins[i].min_tokens) + "," + std::to_string(bins[i].max_tokens) + "," +
             std::to_string(bins[i].problem_ids.size()) + "," + std::to_string(k) + "," + std::to_string(n) + "\n";
    write_text(dir / "bins.csv", b);
  } catch (const Error& e) {
    if (e.code() != Errc::MissingRefCode) throw;
    warnings.push_back(std::string("bins.csv skipped: ") + e.what());
  }
  return warnings;
}

inline int cmd_analyze(const fs::path& store_dir, const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    for (const auto& w : analyze_store(store_dir, a)) err << "warning: " << w << "\n";
    out << "analysis written to " << a.out_dir.value_or(store_dir / "analysis").string() << "\n";
    return kExitOk;
  });
}

// ---- temperature sweeps ----

struct SweepPlan {
  CampaignConfig base;
  std::vector<double> temperatures;
  int parallel = 1;
  int ngram = kDefaultNgram;
};

inline std::string temperature_dir(double t) { return "T" + format_rate(t); }

inline SweepPlan sweep_plan(const CampaignConfig& base, const toml::Table& extra,
                            const std::optional<std::vector<double>>& temperatures, std::optional<int> parallel) {
  SweepPlan plan;
  plan.base = base;
  for (const auto& [key, value] : extra) {
    if (key == "sweep.temperatures") {
      if (value.kind != toml::Value::Kind::Array) throw Error(Errc::InvalidConfig, "sweep.temperatures must be an array");
      for (const auto& item : value.items) {
        if (!item.is_number()) throw Error(Errc::InvalidConfig, "sweep.temperatures must hold numbers");
        plan.temperatures.push_back(item.as_double());
      }
    } else if (key == "sweep.parallel" && value.kind == toml::Value::Kind::Integer) {
      plan.parallel = static_cast<int>(value.integer);
    } else if (key == "sweep.ngram" && value.kind == toml::Value::Kind::Integer) {
      plan.ngram = static_cast<int>(value.integer);
    } else {
      throw Error(Errc::InvalidConfig, "unknown or mistyped key '" + key + "'");
    }
  }
  if (temperatures) plan.temperatures = *temperatures;
  if (parallel) plan.parallel = *parallel;
  if (plan.temperatures.empty()) plan.temperatures.push_back(base.params.temperature);
  std::set<double> seen;
  for (double t : plan.temperatures) {
    if (!seen.insert(t).second) throw Error(Errc::InvalidConfig, "duplicate sweep temperature " + format_rate(t));
    CampaignConfig c = base;
    c.params.temperature = t;
    validate_config(c, c.pricing);  // provider range check
  }
  std::sort(plan.temperatures.begin(), plan.temperatures.end());
  plan.parallel = std::clamp(plan.parallel, 1, static_cast<int>(plan.temperatures.size()));
  return plan;
}

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

// Linear interpolation between order statistics.
inline Quartiles quartiles(std::vector<double> v) {
  Quartiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    double pos = p * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.min = v.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = v.back();
  double s = 0;
  for (double x : v) s += x;
  q.mean = s / static_cast<double>(v.size());
  return q;
}

// One campaign per temperature under <out>/T<t>/, each reported, then
// sweep_hits.csv (temperature x k) and sweep_mcd.csv (MCD quartiles) in <out>.
inline void run_sweep(const SweepPlan& plan, std::ostream& out, std::ostream& err) {
  const auto suite = load_suite(plan.base.suite_path);
  const fs::path root = plan.base.output_dir;
  std::mutex mu;
  std::vector<std::string> failures(plan.temperatures.size());
  std::size_t next = 0;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= plan.temperatures.size()) return;
        i = next++;
      }
      const double t = plan.temperatures[i];
      CampaignConfig c = plan.base;
      c.params.temperature = t;
      c.output_dir = root / temperature_dir(t);
      try {
        CampaignStats stats;
        auto store = run_campaign(suite, c, detail::progress_options(out, &stats, &mu, temperature_dir(t) + " "));
        report_store(store.root(), ReportArgs{});
        std::lock_guard lock(mu);
        detail::print_stats(out, store, stats);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int w = 0; w < plan.parallel; ++w) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  for (std::size_t i = 0; i < failures.size(); ++i)
    if (!failures[i].empty())
      throw Error(Errc::CampaignAborted, temperature_dir(plan.temperatures[i]) + ": " + failures[i]);

  std::string hits = "schema_version,temperature,k,hit_rate\n";
  std::string mcds = "schema_version,temperature,problems,min,q1,median,q3,max,mean\n";
  const std::string v = std::to_string(kReportSchemaVersion);
  for (double t : plan.temperatures) {
    auto snap = CampaignStore::open(root / temperature_dir(t)).snapshot();
    const auto outs = outcomes(snap);
    for (int k = 1; k <= snap.config.samples_cap(); ++k)
      hits += v + "," + format_rate(t) + "," + std::to_string(k) + "," + format_rate(hit_at_k(outs, k)) + "\n";
    std::vector<std::string> warnings;
    std::vector<double> values;
    for (const auto& row : scatter_mcd(snap, ScatterPopulation::All, plan.ngram, "math", &warnings))
      values.push_back(row.mcd);
    for (const auto& w : warnings) err << "warning: " << temperature_dir(t) << " " << w << "\n";
    Quartiles q = quartiles(values);
    mcds += v + "," + format_rate(t) + "," + std::to_string(values.size()) + "," + format_rate(q.min) + "," +
            format_rate(q.q1) + "," + format_rate(q.median) + "," + format_rate(q.q3) + "," + format_rate(q.max) +
            "," + format_rate(q.mean) + "\n";
  }
  write_text(root / "sweep_hits.csv", hits);
  write_text(root / "sweep_mcd.csv", mcds);
}

inline int cmd_sweep(const fs::path& config_path, const Overrides& o,
                     const std::optional<std::vector<double>>& temperatures, std::optional<int> parallel,
                     std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto loaded = detail::load(config_path, o, err);
    auto plan = sweep_plan(loaded.config, loaded.extra, temperatures, parallel);
    run_sweep(plan, out, err);
    out << "sweep written to " << plan.base.output_dir.string() << "\n";
    return kExitOk;
  });
}

}  // namespace hdlscale::cli
