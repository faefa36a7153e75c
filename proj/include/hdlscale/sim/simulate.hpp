#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/sim/process.hpp"
#include "hdlscale/sim/sim_profile.hpp"
#include "hdlscale/util/channel.hpp"

namespace hdlscale {

namespace fs = std::filesystem;

struct SimOptions {
  fs::path scratch_root = fs::temp_directory_path() / "hdlscale";
  // When set, scratch directories of non-passing runs are moved here
  // (per-call destination) instead of being deleted.
  std::optional<fs::path> keep_failed_dir;
};

// Substitutes {code} {tb} {out} token-wise; no shell is involved.
inline std::vector<std::string> expand_template(const std::vector<std::string>& tmpl,
                                                const fs::path& code, const fs::path& tb,
                                                const fs::path& out) {
  std::vector<std::string> argv;
  argv.reserve(tmpl.size());
  for (std::string arg : tmpl) {
    for (const auto& [key, value] : {std::pair<std::string, std::string>{"{code}", code.string()},
                                     {"{tb}", tb.string()},
                                     {"{out}", out.string()}}) {
      for (auto pos = arg.find(key); pos != std::string::npos; pos = arg.find(key, pos + value.size()))
        arg.replace(pos, key.size(), value);
    }
    argv.push_back(std::move(arg));
  }
  return argv;
}

namespace detail {

inline std::string tool_output(const ProcessResult& r) {
  std::string s = r.out;
  if (r.out_truncated) s += "\n[stdout truncated]";
  if (!r.err.empty()) {
    if (!s.empty() && s.back() != '\n') s.push_back('\n');
    s += r.err;
    if (r.err_truncated) s += "\n[stderr truncated]";
  }
  return s;
}

}  // namespace detail

// Total classification of tool outcomes. `run` is null when compilation
// did not succeed. An empty fail pattern disables fail detection.
inline Verdict classify_outcome(const ProcessResult& compile, const ProcessResult* run,
                                const std::regex& pass_re, const std::regex* fail_re) {
  if (compile.timed_out) return {VerdictKind::SimTimeout, "compile timed out"};
  if (!compile.success() || run == nullptr)
    return {VerdictKind::CompileError, detail::tool_output(compile)};
  if (run->timed_out) return {VerdictKind::SimTimeout, detail::tool_output(*run)};
  const std::string output = run->out + "\n" + run->err;
  if (fail_re && std::regex_search(output, *fail_re))
    return {VerdictKind::SimFail, detail::tool_output(*run)};
  if (run->success() && std::regex_search(output, pass_re))
    return {VerdictKind::Pass, detail::tool_output(*run)};
  return {VerdictKind::SimFail, detail::tool_output(*run)};
}

inline fs::path make_scratch_dir(const fs::path& root) {
  fs::create_directories(root);
  std::string tmpl = (root / "sim-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr)
    throw Error(Errc::Io, "mkdtemp under " + root.string() + " failed");
  return tmpl;
}

// Compiles and runs `code` against the problem's testbench in a fresh
// scratch directory. Throws Error(ToolNotFound) when a simulator binary is
// missing; every other outcome is a Verdict.
inline Verdict run_simulation(const std::string& code, const Problem& problem,
                              const SimProfile& profile, const SimOptions& options = {}) {
  const fs::path dir = make_scratch_dir(options.scratch_root);
  const fs::path code_path = dir / "candidate.v";
  const fs::path tb_path = dir / "testbench.v";
  const fs::path out_path = dir / "sim.out";
  {
    std::ofstream(code_path, std::ios::binary) << code;
    std::ofstream(tb_path, std::ios::binary) << problem.testbench_source;
  }

  const std::regex pass_re =
      compile_sentinel_regex(problem.pass_regex.value_or(profile.default_pass_regex));
  const std::string fail_src = problem.fail_regex.value_or(profile.default_fail_regex);
  std::optional<std::regex> fail_re;
  if (!fail_src.empty()) fail_re = compile_sentinel_regex(fail_src);

  const auto timeout = std::chrono::seconds(profile.timeout_s);
  Verdict verdict;
  try {
    ProcessResult compile =
        run_process(expand_template(profile.compile_cmd, code_path, tb_path, out_path), dir, timeout);
    std::optional<ProcessResult> run;
    if (compile.success())
      run = run_process(expand_template(profile.run_cmd, code_path, tb_path, out_path), dir, timeout);
    verdict = classify_outcome(compile, run ? &*run : nullptr, pass_re, fail_re ? &*fail_re : nullptr);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }

  std::error_code ec;
  if (!verdict.passed() && options.keep_failed_dir) {
    fs::create_directories(options.keep_failed_dir->parent_path(), ec);
    fs::remove_all(*options.keep_failed_dir, ec);
    fs::rename(dir, *options.keep_failed_dir, ec);
    if (ec) {  // different filesystem
      fs::copy(dir, *options.keep_failed_dir, fs::copy_options::recursive, ec);
      fs::remove_all(dir, ec);
    }
  } else {
    fs::remove_all(dir, ec);
  }
  return verdict;
}

// ---- worker pool ----

struct SimJob {
  std::string problem_id;
  int index = 0;
  std::string code;
  std::shared_ptr<const Problem> problem;
  std::optional<fs::path> keep_failed_dir;
};

struct SimResult {
  SimJob job;
  Verdict verdict;
  bool tool_missing = false;  // this job hit ToolNotFound
  bool skipped = false;       // drained without running after an abort
  std::string error;
  std::chrono::milliseconds elapsed{0};
};

// Fixed set of worker threads, each driving at most one simulator process
// at a time; jobs wait in a bounded queue. Results go to `sink` from worker
// threads. After the first ToolNotFound the remaining jobs are drained as
// skipped no-ops.
class SimPool {
 public:
  using Sink = std::function<void(SimResult)>;

  SimPool(SimProfile profile, int workers, std::size_t queue_capacity, SimOptions options, Sink sink)
      : profile_(std::move(profile)),
        options_(std::move(options)),
        sink_(std::move(sink)),
        queue_(queue_capacity) {
    if (workers < 1) throw Error(Errc::InvalidConfig, "workers must be >= 1");
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { work(); });
  }

  SimPool(const SimPool&) = delete;
  SimPool& operator=(const SimPool&) = delete;

  ~SimPool() { join(); }

  // Blocks while the queue is full.
  bool submit(SimJob job) { return queue_.push(std::move(job)); }

  // No more jobs; workers exit once the queue is drained.
  void close() { queue_.close(); }

  void join() {
    queue_.close();
    for (auto& t : threads_)
      if (t.joinable()) t.join();
  }

  bool aborted() const { return aborted_; }
  std::size_t queued() const { return queue_.size(); }
  int busy() const { return busy_; }

 private:
  void work() {
    while (auto job = queue_.pop()) {
      SimResult result;
      result.job = std::move(*job);
      if (aborted_) {
        result.skipped = true;
        sink_(std::move(result));
        continue;
      }
      ++busy_;
      const auto start = std::chrono::steady_clock::now();
      try {
        SimOptions opts = options_;
        opts.keep_failed_dir = result.job.keep_failed_dir;
        result.verdict = run_simulation(result.job.code, *result.job.problem, profile_, opts);
      } catch (const Error& e) {
        if (e.code() == Errc::ToolNotFound) {
          result.tool_missing = !aborted_.exchange(true);
          result.skipped = !result.tool_missing;
        } else {
          result.verdict = {VerdictKind::SimFail, std::string("harness error: ") + e.what()};
        }
        result.error = e.what();
      } catch (const std::exception& e) {
        result.verdict = {VerdictKind::SimFail, std::string("harness error: ") + e.what()};
        result.error = e.what();
      }
      result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      --busy_;
      sink_(std::move(result));
    }
  }

  SimProfile profile_;
  SimOptions options_;
  Sink sink_;
  Channel<SimJob> queue_;
  std::vector<std::thread> threads_;
  std::atomic<bool> aborted_{false};
  std::atomic<int> busy_{0};
};

// Runs every job through a pool of `workers` and reports each result, in
// completion order. Throws Error(ToolNotFound) after all jobs are drained if
// any job hit a missing simulator.
inline void run_pool(std::vector<SimJob> jobs, const SimProfile& profile, int workers,
                     const std::function<void(const SimResult&)>& on_result,
                     const SimOptions& options = {}) {
  Channel<SimResult> results;
  std::string missing;
  {
    SimPool pool(profile, workers, std::max<std::size_t>(1, jobs.size()), options,
                 [&](SimResult r) { results.push(std::move(r)); });
    for (auto& job : jobs) pool.submit(std::move(job));
    pool.close();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      auto r = results.pop();
      if (r->tool_missing) missing = r->error;
      on_result(*r);
    }
  }
  if (!missing.empty()) throw Error(Errc::ToolNotFound, missing);
}

}  // namespace hdlscale
