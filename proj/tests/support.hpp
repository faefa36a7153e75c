#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "hdlscale/hdlscale.hpp"

namespace hdlscale::test {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "hdlscale-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string marker_of(const std::string& id) { return id + "_ok"; }

// Problem whose mock testbench accepts candidates declaring `<id>_ok`.
inline Problem mock_problem(const std::string& id, std::set<std::string> tags = {},
                            std::optional<std::string> ref_code = std::nullopt) {
  Problem p;
  p.id = id;
  p.suite = "unit";
  p.spec_text = "Implement y = a & b for problem " + id + ".\n";
  p.testbench_source = "// MOCK_MARKER: " + marker_of(id) + "\nmodule tb; endmodule\n";
  p.tags = std::move(tags);
  p.ref_code = std::move(ref_code);
  return p;
}

inline std::vector<Problem> mock_suite(const std::vector<std::string>& ids) {
  std::vector<Problem> out;
  for (const auto& id : ids) out.push_back(mock_problem(id));
  return out;
}

inline std::string fenced(const std::string& code) { return "Sure.\n```verilog\n" + code + "\n```\n"; }

// Provider that passes exactly at the listed (problem, index) pairs.
class ScriptedProvider : public Transport {
 public:
  explicit ScriptedProvider(std::map<std::string, std::set<int>> passes, std::uint64_t tokens = 10)
      : passes_(std::move(passes)), tokens_(tokens) {}

  HttpReply post(const TransportRequest& request) override {
    auto [id, index] = split_request_id(request.request_id);
    {
      std::lock_guard lock(mu_);
      ++calls_[id];
    }
    auto it = passes_.find(id);
    const bool pass = it != passes_.end() && it->second.count(index);
    return HttpReply{200, chat_reply_body(fenced(mock::candidate_module(index, marker_of(id), pass)), tokens_, tokens_),
                     false, {}};
  }

  int calls(const std::string& id) {
    std::lock_guard lock(mu_);
    return calls_[id];
  }

 private:
  std::map<std::string, std::set<int>> passes_;
  std::uint64_t tokens_;
  std::mutex mu_;
  std::map<std::string, int> calls_;
};

// Chat-completions endpoint on 127.0.0.1 that counts requests and records the
// highest number of requests it was serving at once. `script(n)` picks the
// status of the n-th request (1-based); 200 replies carry `reply_text`.
class LoopbackServer {
 public:
  using Script = std::function<int(int)>;

  explicit LoopbackServer(Script script, std::chrono::milliseconds delay = std::chrono::milliseconds(0),
                          std::string reply_text = "```verilog\nmodule m; endmodule\n```")
      : script_(std::move(script)), delay_(delay), reply_text_(std::move(reply_text)) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      const int now = ++in_flight_;
      {
        std::lock_guard lock(mu_);
        max_in_flight_ = std::max(max_in_flight_, now);
        auth_ = req.get_header_value("Authorization");
        last_body_ = req.body;
      }
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      const int status = script_(n);
      res.status = status;
      if (status == 200)
        res.set_content(chat_reply_body(reply_text_, 11, 22), "application/json");
      else
        res.set_content("{\"error\":\"scripted\"}", "application/json");
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LoopbackServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int requests() const { return requests_; }
  int max_in_flight() {
    std::lock_guard lock(mu_);
    return max_in_flight_;
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }
  std::string last_body() {
    std::lock_guard lock(mu_);
    return last_body_;
  }

  ProviderProfile profile(int max_retries = 3) const {
    ProviderProfile p;
    p.name = "loopback";
    p.base_url = base_url();
    p.auth_env_var = "HDLSCALE_TEST_KEY";
    p.request_timeout_s = 10;
    p.max_retries = max_retries;
    p.retry_base_delay_ms = 5;
    return p;
  }

 private:
  Script script_;
  std::chrono::milliseconds delay_;
  std::string reply_text_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> in_flight_{0};
  std::mutex mu_;
  int max_in_flight_ = 0;
  std::string auth_;
  std::string last_body_;
};

inline CampaignConfig mock_config(const fs::path& out, int cap, StopMode mode = StopMode::EarlyStop) {
  CampaignConfig c;
  c.suite_path = out / "suite";
  c.output_dir = out;
  c.params.model_id = "mock";
  c.max_samples = cap;
  c.stop_mode = mode;
  c.gen_concurrency = 4;
  c.sim_workers = 2;
  c.queue_capacity = 8;
  c.seed = 1;
  c.mock = true;
  c.progress_interval_s = 1;
  return c;
}

// (problem, index) -> verdict kind over a whole store.
inline std::map<std::pair<std::string, int>, VerdictKind> verdict_table(const StoreSnapshot& snap) {
  std::map<std::pair<std::string, int>, VerdictKind> out;
  for (const auto& [id, samples] : snap.samples)
    for (const auto& s : samples) out[{id, s.index}] = s.verdict.kind;
  return out;
}

// Store snapshot built in memory: `first_pass` per problem (0 = never) over
// `done` samples each.
inline StoreSnapshot synthetic_snapshot(const std::vector<std::pair<int, int>>& first_pass_and_done,
                                        StopMode mode = StopMode::EarlyStop, int cap = 512) {
  StoreSnapshot snap;
  snap.config.params.model_id = "m";
  snap.config.max_samples = cap;
  snap.config.stop_mode = mode;
  int n = 0;
  for (const auto& [first, done] : first_pass_and_done) {
    Problem p = mock_problem("p" + std::to_string(n++));
    std::vector<Sample> samples;
    for (int i = 1; i <= done; ++i) {
      Sample s;
      s.problem_id = p.id;
      s.index = i;
      s.verdict.kind = (first > 0 && i >= first && (mode == StopMode::FixedN || i == first))
                           ? VerdictKind::Pass
                           : VerdictKind::SimFail;
      samples.push_back(s);
    }
    snap.samples[p.id] = samples;
    snap.problems.push_back(p);
  }
  return snap;
}

}  // namespace hdlscale::test
