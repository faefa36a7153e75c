// hdlscale: run, resume, report, analyze and sweep sampling campaigns.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdlscale/cli/commands.hpp"

namespace cli = hdlscale::cli;
namespace fs = std::filesystem;

namespace {

// Store directory from the positional argument, -o, or the config file.
std::optional<fs::path> store_dir(const std::string& positional, const cli::Overrides& o,
                                  const std::string& config) {
  if (!positional.empty()) return fs::path(positional);
  if (o.out) return *o.out;
  if (!config.empty()) {
    hdlscale::toml::Table extra;
    return hdlscale::load_config_file(config, &extra).output_dir;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-scaling harness for LLM Verilog generation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config;
  cli::Overrides o;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("-c,--config", config, "Campaign config file (TOML)");
  app.add_flag("--mock", o.mock, "Use the built-in mock provider and mock simulator");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for retry jitter, the mock provider and clustering");
  auto* out_opt = app.add_option("-o,--out", out, "Campaign output directory");

  int max_samples = 0, gen_concurrency = 0, sim_workers = 0, queue_capacity = 0, progress = 0;
  std::string stop_mode, model, suite;
  double temperature = 0;
  std::vector<CLI::Option*> temperature_opts;
  auto add_campaign_flags = [&](CLI::App* sub) {
    sub->add_option("--max-samples", max_samples, "Sample cap per problem");
    sub->add_option("--stop-mode", stop_mode, "early_stop or fixed_n");
    temperature_opts.push_back(sub->add_option("--temperature", temperature, "Sampling temperature"));
    sub->add_option("--model", model, "Model id");
    sub->add_option("--suite", suite, "Suite directory or JSONL file");
    sub->add_option("--gen-concurrency", gen_concurrency, "Requests in flight");
    sub->add_option("--sim-workers", sim_workers, "Concurrent simulations");
    sub->add_option("--queue-capacity", queue_capacity, "Generated samples waiting for simulation");
    sub->add_option("--progress-interval", progress, "Seconds between progress lines");
    sub->add_flag("--keep-failed", o.keep_failed, "Keep scratch directories of failed simulations");
  };

  auto* run = app.add_subcommand("run", "Run a campaign (continues a matching store)");
  add_campaign_flags(run);

  std::string positional;
  auto* resume = app.add_subcommand("resume", "Resume an interrupted campaign");
  resume->add_option("store", positional, "Store directory");

  cli::ReportArgs report_args;
  std::vector<int> checkpoints;
  double discount = 0;
  int normalize = 0;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Write success, cost and fit reports");
  report->add_option("store", positional, "Store directory");
  auto* cp_opt = report->add_option("--checkpoints", checkpoints, "Sample budgets to report")->delimiter(',');
  auto* disc_opt = report->add_option("--discount", discount, "Cost multiplier in (0, 1]");
  auto* norm_opt = report->add_option("--normalize-samples", normalize, "Scale per-problem cost to this many samples");
  report->add_option("--report-dir", report_out, "Output directory (default <store>/reports)");

  cli::AnalyzeArgs analyze_args;
  std::string population = "all", analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Dispersion heatmaps, MCD scatter and length bins");
  analyze->add_option("store", positional, "Store directory");
  analyze->add_option("--problem", analyze_args.problems, "Restrict heatmaps to these problem ids");
  analyze->add_option("-n,--ngram", analyze_args.ngram, "n-gram order")->check(CLI::Range(1, 4));
  analyze->add_option("-k,--clusters", analyze_args.k_clusters, "k-means clusters (0: automatic)");
  analyze->add_option("--population", population, "all or failed")->check(CLI::IsMember({"all", "failed"}));
  analyze->add_option("--tag", analyze_args.highlight_tag, "Tag flagged in scatter.csv");
  analyze->add_option("--bin-size", analyze_args.bin_size, "Problems per length bin");
  analyze->add_option("--analysis-dir", analyze_out, "Output directory (default <store>/analysis)");

  std::vector<double> temperatures;
  int parallel = 0;
  auto* sweep = app.add_subcommand("sweep", "One campaign per temperature plus combined CSVs");
  add_campaign_flags(sweep);
  auto* temps_opt = sweep->add_option("--temperatures", temperatures, "Temperatures to sweep")->delimiter(',');
  auto* par_opt = sweep->add_option("--parallel", parallel, "Campaigns run at once");

  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) o.seed = seed;
  if (*out_opt) o.out = out;
  if (max_samples) o.max_samples = max_samples;
  if (gen_concurrency) o.gen_concurrency = gen_concurrency;
  if (sim_workers) o.sim_workers = sim_workers;
  if (queue_capacity) o.queue_capacity = queue_capacity;
  if (progress) o.progress_interval_s = progress;
  if (!model.empty()) o.model = model;
  if (!suite.empty()) o.suite = suite;
  for (auto* opt : temperature_opts)
    if (*opt) o.temperature = temperature;
  try {
    if (!stop_mode.empty()) o.stop_mode = hdlscale::stop_mode_from_string(stop_mode);
  } catch (const hdlscale::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailed;
  }

  if (*run || *sweep) {
    if (config.empty()) {
      std::cerr << "error: -c/--config is required\n";
      return cli::kExitFailed;
    }
    if (*run) return cli::cmd_run(config, o, std::cout, std::cerr);
    std::optional<std::vector<double>> temps;
    if (*temps_opt) temps = temperatures;
    std::optional<int> par;
    if (*par_opt) par = parallel;
    return cli::cmd_sweep(config, o, temps, par, std::cout, std::cerr);
  }

  std::optional<fs::path> dir;
  try {
    dir = store_dir(positional, o, config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailed;
  }
  if (!dir) {
    std::cerr << "error: no store directory (give it as an argument, with -o, or via -c)\n";
    return cli::kExitFailed;
  }

  if (*resume) return cli::cmd_resume(*dir, std::cout, std::cerr);
  if (*report) {
    if (*cp_opt) report_args.checkpoints = checkpoints;
    if (*disc_opt) report_args.discount_factor = discount;
    if (*norm_opt) report_args.normalize_samples = normalize;
    if (!report_out.empty()) report_args.out_dir = report_out;
    return cli::cmd_report(*dir, report_args, std::cout, std::cerr);
  }
  analyze_args.seed = o.seed.value_or(0);
  analyze_args.population =
      population == "failed" ? hdlscale::ScatterPopulation::FailedOnly : hdlscale::ScatterPopulation::All;
  if (!analyze_out.empty()) analyze_args.out_dir = analyze_out;
  return cli::cmd_analyze(*dir, analyze_args, std::cout, std::cerr);
}
