#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hdlscale/core/types.hpp"
#include "hdlscale/llm/provider_profile.hpp"
#include "hdlscale/util/channel.hpp"

namespace hdlscale {

struct GenerationRequest {
  std::string prompt;
  GenerationParams params;
  std::string request_id;
};

// Exactly one per request. `response` is empty iff the request failed, in
// which case `error` describes the ProviderError.
struct GenerationResult {
  std::string request_id;
  std::optional<std::string> response;
  std::string error;
  UsageRecord usage;
  std::int64_t latency_ms = 0;
  int attempts = 0;

  bool ok() const { return response.has_value(); }
};

// ---- transport ----

struct TransportRequest {
  std::string request_id;
  std::string base_url;
  std::string path;  // relative to base_url, e.g. "/chat/completions"
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::seconds timeout{120};
};

struct HttpReply {
  int status = 0;
  std::string body;
  bool transport_error = false;  // connect/read/write failure or timeout
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Must be safe to call from several threads at once.
  virtual HttpReply post(const TransportRequest& request) = 0;
};

// Adapts a callable; used for in-process providers and tests.
class FunctionTransport : public Transport {
 public:
  using Fn = std::function<HttpReply(const TransportRequest&)>;
  explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
  HttpReply post(const TransportRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

class HttpTransport : public Transport {
 public:
  HttpReply post(const TransportRequest& request) override {
    // "https://host:port/v1" -> client "https://host:port", path prefix "/v1"
    const auto scheme_end = request.base_url.find("://");
    const auto path_start = request.base_url.find('/', scheme_end + 3);
    const std::string origin = request.base_url.substr(0, path_start);
    std::string prefix =
        path_start == std::string::npos ? std::string() : request.base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(request.timeout);
    client.set_read_timeout(request.timeout);
    client.set_write_timeout(request.timeout);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);

    HttpReply reply;
    auto res = client.Post(prefix + request.path, headers, request.body, "application/json");
    if (!res) {
      reply.transport_error = true;
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  }
};

// ---- wire format ----

inline nlohmann::json build_request_body(const GenerationRequest& req,
                                         const ProviderProfile& profile) {
  nlohmann::json body{{"model", req.params.model_id},
                      {"messages", {{{"role", "user"}, {"content", req.prompt}}}},
                      {"temperature", req.params.temperature},
                      {"top_p", req.params.top_p},
                      {"max_tokens", req.params.max_output_tokens},
                      {"n", 1}};
  if (!profile.extra_body_json.empty()) body.merge_patch(nlohmann::json::parse(profile.extra_body_json));
  for (const auto& field : profile.omit_fields) body.erase(field);
  return body;
}

struct ParsedReply {
  std::string content;
  UsageRecord usage;
};

// choices[0].message.content; usage defaults to zeros when absent.
inline std::optional<ParsedReply> parse_chat_reply(const std::string& body, std::string* error) {
  try {
    auto j = nlohmann::json::parse(body);
    ParsedReply out;
    const auto& content = j.at("choices").at(0).at("message").at("content");
    out.content = content.is_null() ? std::string() : content.get<std::string>();
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      if (auto p = u->find("prompt_tokens"); p != u->end() && p->is_number())
        out.usage.input_tokens = p->get<std::uint64_t>();
      if (auto c = u->find("completion_tokens"); c != u->end() && c->is_number())
        out.usage.output_tokens = c->get<std::uint64_t>();
    }
    return out;
  } catch (const std::exception& e) {
    if (error) *error = std::string("malformed response: ") + e.what();
    return std::nullopt;
  }
}

// 408, 429 and 5xx are retried; any other non-2xx status is permanent.
inline bool is_transient_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

// ---- gateway ----

// Owns a pool of `in_flight_cap` workers; each holds at most one request open
// against the transport, so the cap bounds unanswered requests. Results are
// handed to `sink` from worker threads, in completion order.
class Gateway {
 public:
  using Sink = std::function<void(GenerationResult)>;

  Gateway(ProviderProfile profile, std::shared_ptr<Transport> transport, int in_flight_cap,
          Sink sink, std::uint64_t seed = 0)
      : profile_(std::move(profile)),
        transport_(std::move(transport)),
        sink_(std::move(sink)),
        rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    if (in_flight_cap < 1) throw Error(Errc::InvalidConfig, "in_flight_cap must be >= 1");
    if (!profile_.auth_env_var.empty()) {
      if (const char* secret = std::getenv(profile_.auth_env_var.c_str()))
        auth_header_ = std::string("Bearer ") + secret;
    }
    workers_.reserve(static_cast<std::size_t>(in_flight_cap));
    for (int i = 0; i < in_flight_cap; ++i) workers_.emplace_back([this] { work(); });
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ~Gateway() {
    stopping_ = true;
    pending_.close();
    for (auto& t : workers_) t.join();
  }

  bool has_credentials() const { return !auth_header_.empty(); }

  void submit(GenerationRequest request) { pending_.push(std::move(request)); }

  // Drops queued (not yet dispatched) requests and stops the workers once
  // their current request completes.
  void shutdown() {
    stopping_ = true;
    pending_.close();
  }

  // One request through the retry loop; exposed for direct use.
  GenerationResult execute(const GenerationRequest& req) {
    GenerationResult result;
    result.request_id = req.request_id;
    const auto start = std::chrono::steady_clock::now();

    TransportRequest treq;
    treq.request_id = req.request_id;
    treq.base_url = profile_.base_url;
    treq.path = "/chat/completions";
    treq.timeout = std::chrono::seconds(profile_.request_timeout_s);
    try {
      treq.body = build_request_body(req, profile_).dump();
    } catch (const std::exception& e) {
      result.error = std::string("cannot build request: ") + e.what();
      return result;
    }
    if (!auth_header_.empty()) treq.headers.emplace_back("Authorization", auth_header_);

    for (int attempt = 0;; ++attempt) {
      result.attempts = attempt + 1;
      HttpReply reply;
      try {
        reply = transport_->post(treq);
      } catch (const std::exception& e) {
        reply.transport_error = true;
        reply.error = e.what();
      }

      bool transient = false;
      if (reply.transport_error) {
        transient = true;
        result.error = "transport error: " + reply.error;
      } else if (reply.status >= 200 && reply.status < 300) {
        std::string parse_error;
        if (auto parsed = parse_chat_reply(reply.body, &parse_error)) {
          result.response = std::move(parsed->content);
          result.usage = parsed->usage;
          result.error.clear();
        } else {
          result.error = parse_error;
        }
        break;
      } else {
        transient = is_transient_status(reply.status);
        result.error = "HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 512);
      }
      if (!transient || attempt >= profile_.max_retries || stopping_) break;
      std::this_thread::sleep_for(backoff_delay(attempt));
    }
    result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    return result;
  }

  // Full jitter: uniform in [0, base * 2^attempt].
  std::chrono::milliseconds backoff_delay(int attempt) {
    const double cap =
        static_cast<double>(profile_.retry_base_delay_ms) * std::ldexp(1.0, std::min(attempt, 30));
    std::lock_guard lock(rng_mu_);
    std::uniform_real_distribution<double> dist(0.0, cap);
    return std::chrono::milliseconds(static_cast<std::int64_t>(dist(rng_)));
  }

 private:
  void work() {
    while (auto req = pending_.pop()) {
      if (stopping_) break;
      sink_(execute(*req));
    }
  }

  ProviderProfile profile_;
  std::shared_ptr<Transport> transport_;
  Sink sink_;
  std::string auth_header_;
  Channel<GenerationRequest> pending_;
  std::vector<std::thread> workers_;
  std::atomic<bool> stopping_{false};
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

// Stream over the results of one batch; next() returns nullopt after the last.
class BatchStream {
 public:
  BatchStream(std::vector<GenerationRequest> requests, const ProviderProfile& profile,
              std::shared_ptr<Transport> transport, int in_flight_cap)
      : remaining_(requests.size()) {
    gateway_ = std::make_unique<Gateway>(profile, std::move(transport), in_flight_cap,
                                         [this](GenerationResult r) { results_.push(std::move(r)); });
    for (auto& r : requests) gateway_->submit(std::move(r));
  }

  std::optional<GenerationResult> next() {
    if (remaining_ == 0) return std::nullopt;
    auto r = results_.pop();
    if (r) --remaining_;
    return r;
  }

 private:
  std::size_t remaining_;
  Channel<GenerationResult> results_;
  std::unique_ptr<Gateway> gateway_;
};

inline BatchStream generate_batch(std::vector<GenerationRequest> requests,
                                  const ProviderProfile& profile,
                                  std::shared_ptr<Transport> transport, int in_flight_cap) {
  return BatchStream(std::move(requests), profile, std::move(transport), in_flight_cap);
}

}  // namespace hdlscale
