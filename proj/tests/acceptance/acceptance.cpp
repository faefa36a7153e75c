// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "hdlscale/cli/commands.hpp"
#include "lexer_corpus.hpp"
#include "support.hpp"

using namespace hdlscale;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kDispersionTol = 1e-12;
constexpr double kFitTol = 1e-9;
constexpr double kScalingTol = 0.25;      // relative, against ceil(32/W) x 0.2 s
constexpr double kPerJobSlowdown = 2.0;   // W=8 per-job time vs W=1
constexpr int kResumeTrials = 10;

struct Check {
  bool ok = true;
  std::vector<std::string> failures;
  std::string info;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      failures.push_back(what);
    }
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string str(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

SparseVector dense(const std::vector<double>& v) {
  SparseVector s;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) s.emplace_back(static_cast<std::uint32_t>(i), v[i]);
  return s;
}

// ---- 1 ----

double enumerate_pass_at_k(int N, int c, int k) {
  std::uint64_t hits = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << N); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    ++total;
    if (mask & ((1u << c) - 1)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

Check ac1() {
  Check ch;
  const auto start = Clock::now();
  int cases = 0;
  for (int N = 1; N <= 8; ++N)
    for (int c = 0; c <= N; ++c)
      for (int k = 1; k <= N; ++k, ++cases) {
        const double got = pass_at_k(N, c, k), want = enumerate_pass_at_k(N, c, k);
        ch.expect(got == want, "N=" + std::to_string(N) + " c=" + std::to_string(c) + " k=" +
                                   std::to_string(k) + ": " + str(got) + " != " + str(want));
      }
  ch.expect(cases == 240, "case count " + std::to_string(cases));
  ch.expect(pass_at_k(5, 2, 3) == 0.9, "pass_at_k(5,2,3) = " + str(pass_at_k(5, 2, 3)));
  ch.expect(pass_at_k(1, 1, 1) == 1.0 && pass_at_k(2, 1, 1) == 0.5 && pass_at_k(10, 0, 5) == 0.0 &&
                pass_at_k(10, 8, 3) == 1.0,
            "trivial cases");
  ch.expect(seconds_since(start) < 1.0, "runtime " + str(seconds_since(start)) + " s");
  return ch;
}

// ---- 2, 3 ----

StoreSnapshot scripted_campaign(const fs::path& out, std::map<std::string, std::set<int>> passes, int cap,
                                StopMode mode) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : passes) ids.push_back(id);
  CampaignOptions opts;
  opts.transport = std::make_shared<test::ScriptedProvider>(std::move(passes));
  opts.scratch_root = out / "scratch";
  return run_campaign(test::mock_suite(ids), test::mock_config(out / "store", cap, mode), opts).snapshot();
}

Check ac2() {
  Check ch;
  const auto start = Clock::now();
  test::TempDir tmp;
  auto snap = scripted_campaign(tmp.path(), {{"a", {1}}, {"b", {3}}, {"c", {}}}, 5, StopMode::EarlyStop);
  const std::map<int, double> want{{1, 1.0 / 3}, {2, 1.0 / 3}, {3, 2.0 / 3}, {5, 2.0 / 3}};
  for (const auto& [k, rate] : want)
    ch.expect(hit_at_k(snap, k) == rate, "hit@" + std::to_string(k) + " = " + str(hit_at_k(snap, k)));
  const std::vector<CurvePoint> curve{{1, 1.0 / 3}, {3, 2.0 / 3}};
  ch.expect(first_pass_curve(snap) == curve, "first_pass_curve mismatch");
  ch.expect(seconds_since(start) < 5.0, "runtime " + str(seconds_since(start)) + " s");
  return ch;
}

Check ac3() {
  Check ch;
  const auto start = Clock::now();
  const std::map<std::string, std::set<int>> passes{{"a", {3}}, {"b", {1}}, {"c", {}}};
  for (StopMode mode : {StopMode::EarlyStop, StopMode::FixedN}) {
    test::TempDir tmp;
    auto snap = scripted_campaign(tmp.path(), passes, 5, mode);
    const std::map<std::string, std::size_t> want =
        mode == StopMode::EarlyStop ? std::map<std::string, std::size_t>{{"a", 3}, {"b", 1}, {"c", 5}}
                                    : std::map<std::string, std::size_t>{{"a", 5}, {"b", 5}, {"c", 5}};
    for (const auto& [id, n] : want)
      ch.expect(snap.samples_of(id).size() == n, std::string(to_string(mode)) + " " + id + ": " +
                                                     std::to_string(snap.samples_of(id).size()) + " samples");
  }
  ch.expect(seconds_since(start) < 10.0, "runtime " + str(seconds_since(start)) + " s");
  return ch;
}

// ---- 4 ----

Check ac4() {
  Check ch;
  test::TempDir tmp;
  SimProfile prof;
  prof.name = "stub";
  prof.compile_cmd = {"sleep", "0.2"};
  prof.run_cmd = {"echo", "PASS"};
  prof.default_pass_regex = "PASS";
  prof.default_fail_regex = "FAIL";
  prof.timeout_s = 10;
  SimOptions opts;
  opts.scratch_root = tmp.path();
  auto problem = std::make_shared<const Problem>(test::mock_problem("t"));
  std::map<int, double> per_job;
  for (int w : {1, 2, 4, 8}) {
    std::vector<SimJob> jobs;
    for (int i = 1; i <= 32; ++i) jobs.push_back(SimJob{"t", i, "module m; endmodule", problem, std::nullopt});
    std::atomic<long long> elapsed_ms{0};
    std::atomic<int> passed{0};
    const auto start = Clock::now();
    run_pool(jobs, prof, w, [&](const SimResult& r) {
      elapsed_ms += r.elapsed.count();
      if (r.verdict.passed()) ++passed;
    }, opts);
    const double wall = seconds_since(start);
    const double ideal = std::ceil(32.0 / w) * 0.2;
    per_job[w] = elapsed_ms / 32.0;
    ch.expect(passed == 32, "W=" + std::to_string(w) + ": " + std::to_string(passed.load()) + "/32 passed");
    ch.expect(std::abs(wall - ideal) <= kScalingTol * ideal,
              "W=" + std::to_string(w) + ": " + str(wall) + " s vs ideal " + str(ideal) + " s");
  }
  ch.expect(per_job[8] <= kPerJobSlowdown * per_job[1],
            "per-job " + str(per_job[8]) + " ms at W=8 vs " + str(per_job[1]) + " ms at W=1");
  return ch;
}

// ---- 5 ----

GenerationRequest request(const std::string& id) {
  GenerationRequest r;
  r.request_id = id;
  r.prompt = "Build a 2:1 mux.";
  r.params.model_id = "test-model";
  r.params.temperature = 0.5;
  r.params.max_output_tokens = 256;
  return r;
}

Check ac5() {
  Check ch;
  const auto start = Clock::now();
  {
    test::LoopbackServer server([](int) { return 200; }, 30ms);
    std::vector<GenerationRequest> reqs;
    for (int i = 1; i <= 24; ++i) reqs.push_back(request(make_request_id("p", i)));
    auto stream = generate_batch(reqs, server.profile(), std::make_shared<HttpTransport>(), 4);
    int ok = 0;
    while (auto r = stream.next()) ok += r->ok();
    ch.expect(ok == 24, std::to_string(ok) + "/24 succeeded");
    ch.expect(server.max_in_flight() <= 4, "in-flight peak " + std::to_string(server.max_in_flight()));
  }
  {
    test::LoopbackServer server([](int n) { return n <= 2 ? 429 : 200; });
    Gateway g(server.profile(3), std::make_shared<HttpTransport>(), 1, [](GenerationResult) {});
    auto r = g.execute(request("p#1"));
    ch.expect(r.ok() && r.attempts == 3 && server.requests() == 3,
              "429x2 then 200: attempts " + std::to_string(r.attempts) + ", requests " +
                  std::to_string(server.requests()));
  }
  {
    const int max_retries = 3;
    test::LoopbackServer server([](int) { return 500; });
    Gateway g(server.profile(max_retries), std::make_shared<HttpTransport>(), 1, [](GenerationResult) {});
    auto r = g.execute(request("p#1"));
    ch.expect(!r.ok() && r.attempts == max_retries + 1 && server.requests() == max_retries + 1,
              "always 500: attempts " + std::to_string(r.attempts) + ", requests " +
                  std::to_string(server.requests()));
  }
  ch.expect(seconds_since(start) < 10.0, "runtime " + str(seconds_since(start)) + " s");
  return ch;
}

// ---- 6 ----

Check ac6() {
  Check ch;
  auto same = vectorize({"assign y = a & b;", "assign y = a & b;", "assign y = a & b;"});
  ch.expect(std::abs(mcd(same)) <= kDispersionTol, "identical: " + str(mcd(same)));
  const double orth = mcd({dense({1, 0}), dense({0, 1})});
  ch.expect(std::abs(orth - 1.0) <= kDispersionTol, "orthogonal: " + str(orth));
  const double three = mcd({dense({1, 0}), dense({3, 0}), dense({0, 2})});
  ch.expect(std::abs(three - 2.0 / 3.0) <= kDispersionTol, "3-vector: " + str(three));

  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int dims = 24;
    std::vector<std::vector<double>> raw(20, std::vector<double>(dims));
    std::vector<SparseVector> vs;
    for (auto& v : raw) {
      for (auto& x : v) x = u(rng) < 0.35 ? u(rng) : 0.0;
      vs.push_back(dense(v));
    }
    auto m = similarity_matrix(vs);
    double sum = 0;
    int pairs = 0;
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        double d = 0, na = 0, nb = 0;
        for (int t = 0; t < dims; ++t) {
          d += raw[i][t] * raw[j][t];
          na += raw[i][t] * raw[i][t];
          nb += raw[j][t] * raw[j][t];
        }
        double want = na == 0 || nb == 0 ? 0.0 : d / (std::sqrt(na) * std::sqrt(nb));
        if (i == j) want = na == 0 ? 0.0 : 1.0;
        ch.expect(std::abs(m.at(i, j) - want) <= kDispersionTol,
                  "matrix (" + std::to_string(i) + "," + std::to_string(j) + ")");
        if (j > i) {
          sum += 1 - want;
          ++pairs;
        }
      }
    ch.expect(std::abs(mcd(vs) - sum / pairs) <= kDispersionTol, "mcd vs upper-triangle mean");
  }
  return ch;
}

// ---- 7 ----

Check ac7() {
  Check ch;
  const auto& corpus = test::lexer_corpus();
  ch.expect(corpus.size() == 25, "corpus size " + std::to_string(corpus.size()));
  for (const auto& c : corpus) ch.expect(tokenize(c.source).tokens == c.tokens, "stream differs: " + c.source);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s(rng() % 96, '\0');
    for (auto& b : s) b = static_cast<char>(rng() & 0xFF);
    try {
      auto a = tokenize(s);
      ch.expect(a == tokenize(s), "nondeterministic on fuzz input");
    } catch (const std::exception& e) {
      ch.expect(false, std::string("fuzz input threw: ") + e.what());
    }
  }
  return ch;
}

// ---- 8 ----

Check ac8() {
  Check ch;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SparseVector> vs;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = u(rng) < 0.4 ? u(rng) : 0.0;
    vs.push_back(dense(v));
  }
  auto first = cluster_order(vs, 16, 4, 99);
  for (int run = 0; run < 10; ++run)
    ch.expect(cluster_order(vs, 16, 4, 99).permutation == first.permutation, "run " + std::to_string(run) + " differs");
  auto sorted = first.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ch.expect(sorted[i] == i, "permutation is not bijective");

  std::vector<SparseVector> blobs;
  for (int i = 0; i < 12; ++i) blobs.push_back(i % 2 ? dense({1, 0.1, 0}) : dense({0, 0.1, 1}));
  auto r = cluster_order(blobs, 3, 2, 5);
  std::vector<int> ordered;
  for (auto p : r.permutation) ordered.push_back(static_cast<int>(p % 2));
  int switches = 0;
  for (std::size_t i = 1; i < ordered.size(); ++i) switches += ordered[i] != ordered[i - 1];
  ch.expect(switches == 1, "two blobs interleave (" + std::to_string(switches) + " switches)");
  return ch;
}

// ---- 9 ----

Check ac9() {
  Check ch;
  std::vector<CurvePoint> curve;
  for (int k : {3, 8, 64, 512}) curve.push_back({k, 0.1 + 0.05 * std::log(std::log(k))});
  auto fit = fit_loglog(curve);
  ch.expect(std::abs(fit.a - 0.1) < kFitTol, "a = " + str(fit.a));
  ch.expect(std::abs(fit.b - 0.05) < kFitTol, "b = " + str(fit.b));
  return ch;
}

// ---- 10 ----

// Runs the CLI in its own process group; stdout/stderr discarded.
pid_t spawn(const std::vector<std::string>& args) {
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::setpgid(0, 0);
    const int null = ::open("/dev/null", O_WRONLY);
    ::dup2(null, 1);
    ::dup2(null, 2);
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  ::waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::tuple<std::string, int, VerdictKind>> verdict_rows(const fs::path& store) {
  std::vector<std::tuple<std::string, int, VerdictKind>> rows;
  auto snap = CampaignStore::open(store).snapshot();
  for (const auto& [id, samples] : snap.samples)
    for (const auto& s : samples) rows.emplace_back(id, s.index, s.verdict.kind);
  return rows;
}

Check ac10() {
  Check ch;
  test::TempDir tmp;
  const fs::path cfg = tmp / "campaign.toml";
  std::ofstream(cfg) << "[campaign]\nsuite = \"" << (fs::path(HDLSCALE_SOURCE_DIR) / "demo" / "basics").string()
                     << "\"\noutput_dir = \"unused\"\nmax_samples = 24\nstop_mode = \"early_stop\"\n"
                        "gen_concurrency = 4\nsim_workers = 2\nqueue_capacity = 4\nseed = 5\nmock = true\n\n"
                        "[generation]\nmodel = \"mock\"\ntemperature = 0.8\n\n"
                        "[mock]\npass_prob = 0.02\ntemperature_gain = 0.03\ndelay_ms = 25\n";
  const std::string cli = HDLSCALE_CLI_PATH;

  const auto start = Clock::now();
  const int ref_exit = wait_exit(spawn({cli, "run", "-c", cfg.string(), "-o", (tmp / "ref").string()}));
  const double ref_wall = seconds_since(start);
  ch.expect(ref_exit == 0, "reference run exited " + std::to_string(ref_exit));
  if (!ch.ok) return ch;
  const auto reference = verdict_rows(tmp / "ref");

  std::mt19937_64 rng(std::random_device{}());
  std::uniform_real_distribution<double> when(0.05 * ref_wall, 0.95 * ref_wall);
  int resumed = 0, mid_run = 0;
  for (int trial = 0; trial < kResumeTrials; ++trial) {
    const fs::path store = tmp / ("trial" + std::to_string(trial));
    const pid_t pid = spawn({cli, "run", "-c", cfg.string(), "-o", store.string()});
    std::this_thread::sleep_for(std::chrono::duration<double>(when(rng)));
    ::kill(-pid, SIGKILL);
    wait_exit(pid);
    if (fs::exists(store / "campaign.json")) {
      ++resumed;
      mid_run += verdict_rows(store).size() < reference.size();
    }
    // A kill before the store skeleton exists leaves nothing to resume.
    const int code = fs::exists(store / "campaign.json")
                         ? wait_exit(spawn({cli, "resume", store.string()}))
                         : wait_exit(spawn({cli, "run", "-c", cfg.string(), "-o", store.string()}));
    ch.expect(code == 0, "trial " + std::to_string(trial) + ": recovery exited " + std::to_string(code));
    if (code == 0)
      ch.expect(verdict_rows(store) == reference, "trial " + std::to_string(trial) + ": verdicts differ");
  }
  ch.info = std::to_string(resumed) + " resumed, " + std::to_string(mid_run) + " killed mid-run, " +
            std::to_string(reference.size()) + " samples";
  return ch;
}

// ---- 11 ----

Check ac11() {
  Check ch;
  StoreSnapshot snap = test::synthetic_snapshot({{0, 1}});
  snap.samples["p0"][0].usage = {1'000'000, 1'000'000};
  auto r = cost_report(snap, {{"m", {0.15, 0.60}}});
  ch.expect(format_usd(r.per_problem_usd.at("p0")) == "0.750000", "0.75 fixture: " + format_usd(r.mean_usd));
  snap.samples["p0"][0].usage = {0, 0};
  ch.expect(format_usd(cost_report(snap, {{"m", {0.15, 0.60}}}).mean_usd) == "0.000000", "zero usage");

  const std::vector<std::string> suites{"VerilogEval", "RTLLM", "GenBen"};
  const std::vector<std::pair<std::string, std::vector<std::string>>> table{
      {"Gemini-1.5-flash", {"0.04", "0.07", "0.15"}}, {"Gemini-2.0-flash", {"0.06", "0.12", "0.34"}},
      {"GPT-4o-mini", {"0.16", "0.23", "0.57"}},      {"GPT-4o", {"1.87", "3.12", "7.80"}},
      {"Claude-3.5-Haiku", {"0.61", "1.01", "2.50"}}, {"Claude-3.5-Sonnet", {"2.36", "4.38", "9.36"}}};
  std::vector<CostCell> cells;
  for (const auto& [model, values] : table)
    for (std::size_t s = 0; s < suites.size(); ++s) cells.push_back({model, suites[s], std::stod(values[s])});
  auto grid = cost_grid_rows(cells);
  ch.expect(grid.size() == table.size() + 1, "grid rows " + std::to_string(grid.size()));
  ch.expect(!grid.empty() && grid[0] == std::vector<std::string>{"", "VerilogEval", "RTLLM", "GenBen"}, "header row");
  for (std::size_t i = 0; i < table.size() && i + 1 < grid.size(); ++i) {
    std::vector<std::string> want{table[i].first};
    want.insert(want.end(), table[i].second.begin(), table[i].second.end());
    ch.expect(grid[i + 1] == want, "row " + table[i].first);
  }
  ch.expect(format_cost_grid(cells).find("Gemini-1.5-flash  |        0.04 |  0.07 |   0.15") != std::string::npos,
            "formatted grid row");
  return ch;
}

// ---- 12 ----

Check ac12() {
  Check ch;
  const auto start = Clock::now();
  test::TempDir tmp;
  CampaignConfig base = test::mock_config(tmp / "sweep", 12, StopMode::FixedN);
  base.suite_path = fs::path(HDLSCALE_SOURCE_DIR) / "demo" / "basics";
  base.mock_settings.pass_prob = 0.02;
  base.mock_settings.temperature_gain = 0.15;
  auto plan = cli::sweep_plan(base, {}, std::vector<double>{1.8, 0.2, 1.0}, 3);
  std::ostringstream out, err;
  cli::run_sweep(plan, out, err);

  std::map<double, double> final_hit;
  for (const auto& row : parse_csv(slurp(tmp / "sweep" / "sweep_hits.csv")))
    if (row.size() == 4 && row[2] == "12") final_hit[std::stod(row[1])] = std::stod(row[3]);
  std::map<double, double> median_mcd;
  for (const auto& row : parse_csv(slurp(tmp / "sweep" / "sweep_mcd.csv")))
    if (row.size() == 9 && row[0] != "schema_version") median_mcd[std::stod(row[1])] = std::stod(row[5]);
  ch.expect(final_hit.size() == 3 && median_mcd.size() == 3, "sweep CSVs incomplete");
  auto ordered = [](const std::map<double, double>& m, bool strict) {
    for (auto it = m.begin(); it != m.end() && std::next(it) != m.end(); ++it)
      if (strict ? !(it->second < std::next(it)->second) : !(it->second <= std::next(it)->second)) return false;
    return true;
  };
  std::string hits, mcds;
  for (const auto& [t, v] : final_hit) hits += " " + format_rate(t) + ":" + format_rate(v);
  for (const auto& [t, v] : median_mcd) mcds += " " + format_rate(t) + ":" + format_rate(v);
  ch.expect(ordered(final_hit, false), "final hit rate not non-decreasing:" + hits);
  ch.expect(ordered(median_mcd, true), "median MCD not increasing:" + mcds);
  ch.expect(seconds_since(start) < 60.0, "runtime " + str(seconds_since(start)) + " s");
  return ch;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Check (*)()>> criteria{
      {"AC1 pass@k equals subset enumeration", ac1},
      {"AC2 hit@k semantics", ac2},
      {"AC3 stop rule sample counts", ac3},
      {"AC4 simulation pool scaling", ac4},
      {"AC5 gateway in-flight cap and retries", ac5},
      {"AC6 dispersion math", ac6},
      {"AC7 lexer corpus and fuzz", ac7},
      {"AC8 clustering determinism", ac8},
      {"AC9 log-log fit recovery", ac9},
      {"AC10 crash and resume", ac10},
      {"AC11 cost accounting", ac11},
      {"AC12 temperature sweep ordering", ac12},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check ch;
    const auto start = Clock::now();
    try {
      ch = run();
    } catch (const std::exception& e) {
      ch.expect(false, std::string("threw: ") + e.what());
    }
    std::printf("%s %s (%.2f s)%s\n", ch.ok ? "PASS" : "FAIL", name.c_str(), seconds_since(start),
                ch.info.empty() ? "" : (" [" + ch.info + "]").c_str());
    for (std::size_t i = 0; i < ch.failures.size() && i < 10; ++i) std::printf("    %s\n", ch.failures[i].c_str());
    std::fflush(stdout);
    failed += !ch.ok;
  }
  return failed ? 1 : 0;
}
