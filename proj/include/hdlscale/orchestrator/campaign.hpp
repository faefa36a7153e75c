#pragma once

#include <algorithm>
#include <chrono>
#include <climits>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/json_io.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/llm/gateway.hpp"
#include "hdlscale/llm/mock_provider.hpp"
#include "hdlscale/llm/prompt.hpp"
#include "hdlscale/orchestrator/store.hpp"
#include "hdlscale/sim/simulate.hpp"
#include "hdlscale/util/channel.hpp"

namespace hdlscale {

struct CampaignProgress {
  int problems_terminal = 0;
  int problems_total = 0;
  int samples_issued = 0;
  int samples_done = 0;
  int passes = 0;
};

struct CampaignStats {
  int max_gen_in_flight = 0;
  // Issued but not yet finalized samples (generating, queued, simulating).
  int max_pending = 0;
  int samples_persisted = 0;
  int overshoot = 0;
  std::chrono::milliseconds wall{0};
};

struct CampaignOptions {
  // Provider transport; when null, the scripted mock for --mock configs and
  // HTTP otherwise.
  std::shared_ptr<Transport> transport;
  std::function<void(const CampaignProgress&)> on_progress;
  CampaignStats* stats = nullptr;
  fs::path scratch_root = fs::temp_directory_path() / "hdlscale";
};

namespace detail {

inline json comparable_config(const CampaignConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("progress_interval_s");
  return j;
}

class Coordinator {
 public:
  Coordinator(const CampaignStore& store, CampaignOptions& opts)
      : store_(store), cfg_(store.config()), opts_(opts) {}

  void run() {
    const auto started = std::chrono::steady_clock::now();
    init_states();
    if (all_terminal()) {
      report_progress();
      finish_stats(started);
      return;
    }

    std::shared_ptr<Transport> transport = opts_.transport;
    if (!transport) {
      if (cfg_.mock)
        transport = std::make_shared<MockProviderTransport>(store_.problems(), cfg_.mock_settings, cfg_.seed);
      else
        transport = std::make_shared<HttpTransport>();
    }

    const int G = cfg_.gen_concurrency;
    const int Q = cfg_.queue_capacity;
    const int W = cfg_.sim_workers;
    SimOptions sim_opts;
    sim_opts.scratch_root = opts_.scratch_root;

    // events_ outlives both stages; they push into it from their threads.
    auto pool = std::make_unique<SimPool>(resolve_sim_profile(cfg_), W, static_cast<std::size_t>(Q),
                                          sim_opts, [this](SimResult r) { events_.push(std::move(r)); });
    auto gateway = std::make_unique<Gateway>(
        resolve_provider(cfg_), transport, G,
        [this](GenerationResult r) { events_.push(std::move(r)); }, cfg_.seed);

    const auto interval = std::chrono::seconds(cfg_.progress_interval_s);
    auto next_tick = std::chrono::steady_clock::now() + interval;
    while (!aborted_) {
      issue(*gateway, G, G + Q + W);
      if (all_terminal() && outstanding_ == 0) break;
      auto now = std::chrono::steady_clock::now();
      if (now >= next_tick) {
        report_progress();
        next_tick = now + interval;
        continue;
      }
      auto ev = events_.pop_for(next_tick - now);
      if (!ev) continue;
      handle(std::move(*ev), pool.get());
    }

    if (aborted_) {
      gateway.reset();
      pool->join();
      while (auto ev = events_.pop_for(std::chrono::milliseconds(0))) handle(std::move(*ev), nullptr);
      finish_stats(started);
      throw Error(Errc::CampaignAborted, abort_reason_);
    }
    gateway.reset();
    pool.reset();
    report_progress();
    finish_stats(started);
  }

 private:
  struct State {
    std::shared_ptr<const Problem> problem;
    int next_index = 1;
    int done = 0;
    std::optional<int> first_pass;
    int known_pass_min = INT_MAX;
    std::map<int, Sample> buffer;
    bool terminal = false;
  };

  struct Pending {
    std::size_t state = 0;
    int index = 0;
    Timestamp issued_at{};
  };

  using Event = std::variant<GenerationResult, SimResult>;

  void init_states() {
    const StoreSnapshot snap = store_.snapshot();
    for (const auto& p : store_.problems()) {
      State st;
      st.problem = std::make_shared<const Problem>(p);
      ProblemProgress prog = snap.progress(p.id);
      st.done = prog.samples_done;
      st.next_index = st.done + 1;
      st.first_pass = prog.first_pass_index;
      st.terminal = prog.terminal;
      states_.push_back(std::move(st));
    }
  }

  bool all_terminal() const {
    return std::all_of(states_.begin(), states_.end(), [](const State& s) { return s.terminal; });
  }

  bool eligible(const State& st) const {
    if (st.terminal || st.next_index > cfg_.samples_cap()) return false;
    return cfg_.mode() == StopMode::FixedN || st.next_index < st.known_pass_min;
  }

  // Round-robin across problems while both the in-flight and pending bounds allow.
  void issue(Gateway& gateway, int gen_cap, int pending_cap) {
    while (gen_in_flight_ < gen_cap && outstanding_ < pending_cap) {
      std::optional<std::size_t> pick;
      for (std::size_t step = 0; step < states_.size(); ++step) {
        std::size_t i = (cursor_ + step) % states_.size();
        if (eligible(states_[i])) {
          pick = i;
          break;
        }
      }
      if (!pick) return;
      cursor_ = (*pick + 1) % states_.size();
      State& st = states_[*pick];
      const int index = st.next_index++;
      GenerationRequest req;
      req.request_id = make_request_id(st.problem->id, index);
      req.prompt = build_prompt(*st.problem, cfg_.prompt_version);
      req.params = cfg_.params;
      pending_[req.request_id] = Pending{*pick, index, now_utc()};
      ++gen_in_flight_;
      ++outstanding_;
      ++issued_;
      stats_.max_gen_in_flight = std::max(stats_.max_gen_in_flight, gen_in_flight_);
      stats_.max_pending = std::max(stats_.max_pending, outstanding_);
      gateway.submit(std::move(req));
    }
  }

  void handle(Event ev, SimPool* pool) {
    if (auto* gen = std::get_if<GenerationResult>(&ev)) {
      on_generation(std::move(*gen), pool);
    } else {
      on_simulation(std::move(std::get<SimResult>(ev)));
    }
  }

  void on_generation(GenerationResult r, SimPool* pool) {
    auto it = pending_.find(r.request_id);
    if (it == pending_.end()) return;
    const Pending p = it->second;
    pending_.erase(it);
    State& st = states_[p.state];

    Sample s;
    s.problem_id = st.problem->id;
    s.index = p.index;
    s.raw_response = r.response.value_or("");
    s.usage = r.usage;
    s.latency_ms = r.latency_ms;
    s.params = cfg_.params;
    s.created_at = p.issued_at;

    if (!r.ok()) {
      s.verdict = {VerdictKind::ProviderError, r.error};
    } else if (auto code = try_extract_code(*r.response)) {
      s.extracted_code = std::move(code);
    } else {
      s.verdict = {VerdictKind::ExtractError, "no module...endmodule found in response"};
    }

    const bool needs_sim = s.extracted_code.has_value();
    const bool superseded = cfg_.mode() == StopMode::EarlyStop &&
                            (st.terminal || p.index > st.known_pass_min);
    if (needs_sim && superseded) {
      s.verdict = {VerdictKind::SimFail, "not simulated: an earlier sample already passed"};
      --gen_in_flight_;
      finalize(std::move(s));
      return;
    }
    if (needs_sim) {
      if (pool == nullptr || aborted_) {
        --gen_in_flight_;
        --outstanding_;
        return;
      }
      SimJob job;
      job.problem_id = s.problem_id;
      job.index = s.index;
      job.code = *s.extracted_code;
      job.problem = st.problem;
      if (cfg_.debug_keep_failed) job.keep_failed_dir = store_.failed_dir(s.problem_id, s.index);
      in_sim_[{p.state, p.index}] = std::move(s);
      pool->submit(std::move(job));
      --gen_in_flight_;
      return;
    }
    --gen_in_flight_;
    finalize(std::move(s));
  }

  void on_simulation(SimResult r) {
    std::size_t state = 0;
    for (; state < states_.size(); ++state)
      if (states_[state].problem->id == r.job.problem_id) break;
    auto it = in_sim_.find({state, r.job.index});
    if (it == in_sim_.end()) return;
    Sample s = std::move(it->second);
    in_sim_.erase(it);
    if (r.tool_missing || r.skipped) {
      if (r.tool_missing && !aborted_) {
        aborted_ = true;
        abort_reason_ = r.error;
      }
      --outstanding_;
      return;
    }
    s.verdict = std::move(r.verdict);
    finalize(std::move(s));
  }

  // Persists samples strictly in index order; in early-stop mode everything
  // after the first persisted pass goes to the overshoot log.
  void finalize(Sample s) {
    --outstanding_;
    State& st = states_[state_of(s.problem_id)];
    if (st.terminal) {
      store_.append_overshoot(s);
      ++stats_.overshoot;
      return;
    }
    if (s.verdict.passed() && cfg_.mode() == StopMode::EarlyStop)
      st.known_pass_min = std::min(st.known_pass_min, s.index);
    st.buffer.emplace(s.index, std::move(s));

    for (auto it = st.buffer.find(st.done + 1); it != st.buffer.end() && !st.terminal;
         it = st.buffer.find(st.done + 1)) {
      Sample next = std::move(it->second);
      st.buffer.erase(it);
      store_.append(next);
      ++st.done;
      ++stats_.samples_persisted;
      if (next.verdict.passed()) {
        ++passes_;
        if (!st.first_pass) st.first_pass = next.index;
        if (cfg_.mode() == StopMode::EarlyStop) st.terminal = true;
      }
      if (st.done >= cfg_.samples_cap()) st.terminal = true;
    }
    if (st.terminal) {
      for (auto& [idx, extra] : st.buffer) {
        store_.append_overshoot(extra);
        ++stats_.overshoot;
      }
      st.buffer.clear();
    }
  }

  std::size_t state_of(const std::string& id) const {
    for (std::size_t i = 0; i < states_.size(); ++i)
      if (states_[i].problem->id == id) return i;
    throw Error(Errc::Io, "unknown problem " + id);
  }

  void report_progress() {
    if (!opts_.on_progress) return;
    CampaignProgress p;
    p.problems_total = static_cast<int>(states_.size());
    for (const auto& st : states_) {
      p.problems_terminal += st.terminal;
      p.samples_done += st.done;
      p.passes += st.first_pass.has_value();
    }
    p.samples_issued = issued_;
    opts_.on_progress(p);
  }

  void finish_stats(std::chrono::steady_clock::time_point started) {
    stats_.wall = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    if (opts_.stats) *opts_.stats = stats_;
  }

  const CampaignStore& store_;
  const CampaignConfig& cfg_;
  CampaignOptions& opts_;
  Channel<Event> events_;
  std::vector<State> states_;
  std::map<std::string, Pending> pending_;
  std::map<std::pair<std::size_t, int>, Sample> in_sim_;
  std::size_t cursor_ = 0;
  int gen_in_flight_ = 0;
  int outstanding_ = 0;
  int issued_ = 0;
  int passes_ = 0;
  bool aborted_ = false;
  std::string abort_reason_;
  CampaignStats stats_;
};

}  // namespace detail

// Samples every problem until it is terminal: first Pass or the sample cap in
// early-stop mode, exactly the cap in fixed-N mode. Continues an existing
// store in config.output_dir when its snapshot matches `config`.
inline CampaignStore run_campaign(const std::vector<Problem>& suite, const CampaignConfig& config,
                                  CampaignOptions opts = {}) {
  CampaignConfig cfg = validate_config(config, config.pricing);
  const fs::path root = cfg.output_dir;
  std::optional<CampaignStore> store;
  if (fs::exists(root / "campaign.json")) {
    store.emplace(CampaignStore::open(root));
    if (detail::comparable_config(store->config()) != detail::comparable_config(cfg) ||
        store->problems() != suite)
      throw Error(Errc::ConfigMismatch,
                  root.string() + " holds a campaign with a different config or suite");
    store->repair();
  } else {
    store.emplace(CampaignStore::create(root, cfg, suite));
  }
  detail::Coordinator(*store, opts).run();
  return std::move(*store);
}

// Continues every non-terminal problem of the store at `root`.
inline CampaignStore resume_campaign(const fs::path& root, CampaignOptions opts = {}) {
  CampaignStore store = CampaignStore::open(root);
  validate_config(store.config(), store.config().pricing);
  store.repair();
  detail::Coordinator(store, opts).run();
  return store;
}

}  // namespace hdlscale
