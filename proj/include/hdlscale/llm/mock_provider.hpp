#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/llm/gateway.hpp"
#include "hdlscale/sim/sim_profile.hpp"

namespace hdlscale {

inline std::string make_request_id(std::string_view problem_id, int index) {
  return std::string(problem_id) + "#" + std::to_string(index);
}

inline std::pair<std::string, int> split_request_id(std::string_view request_id) {
  auto hash = request_id.rfind('#');
  if (hash == std::string_view::npos) return {std::string(request_id), 0};
  return {std::string(request_id.substr(0, hash)),
          std::stoi(std::string(request_id.substr(hash + 1)))};
}

namespace mock {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in [0, 1) determined by (seed, problem, index, stream).
inline double uniform(std::uint64_t seed, std::string_view problem_id, int index, int stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a(problem_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// A small module in one of several styles; distinct variants share few
// token n-grams.
inline std::string candidate_module(int variant, const std::string& marker, bool passing) {
  static const char* ops[] = {"&", "|", "^", "~^", "+", "-", "<<", ">>"};
  const std::string v = std::to_string(variant);
  const std::string op = ops[variant % 8];
  std::string body;
  switch (variant % 3) {
    case 0:
      body = "  wire t" + v + ";\n  assign t" + v + " = a " + op + " b;\n  assign y = t" + v + ";\n";
      break;
    case 1:
      body = "  reg r" + v + ";\n  always @(*) begin\n    r" + v + " = a " + op + " b;\n  end\n" +
             "  assign y = r" + v + ";\n";
      break;
    default:
      body = "  assign y = (a " + op + " b) ? 1'b1 : 1'b0; // variant " + v + "\n" +
             "  localparam integer K" + v + " = " + v + ";\n";
      break;
  }
  if (passing) body += "  wire " + marker + ";\n";
  return "module top_module (\n  input  wire a,\n  input  wire b,\n  output wire y\n);\n" + body +
         "endmodule";
}

}  // namespace mock

// In-process provider answering chat-completions requests for a known suite.
// Sample (problem, index) passes iff u < pass_prob + temperature_gain * T, and
// picks variant floor(u' * (1 + floor(T * variants_per_temperature))), with u
// and u' independent of T.
class MockProviderTransport : public Transport {
 public:
  MockProviderTransport(const std::vector<Problem>& suite, MockSettings settings, std::uint64_t seed)
      : settings_(settings), seed_(seed) {
    for (const auto& p : suite) markers_[p.id] = mock_marker_for(p.testbench_source);
  }

  HttpReply post(const TransportRequest& request) override {
    if (settings_.delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(settings_.delay_ms));
    auto [problem_id, index] = split_request_id(request.request_id);
    auto body = nlohmann::json::parse(request.body);
    const double temperature = body.value("temperature", 1.0);
    const std::string prompt = body.at("messages").at(0).at("content").get<std::string>();

    auto it = markers_.find(problem_id);
    const std::string marker = it == markers_.end() ? std::string(kMockDefaultMarker) : it->second;
    const double p_pass =
        std::clamp(settings_.pass_prob + settings_.temperature_gain * temperature, 0.0, 1.0);
    const bool passing = mock::uniform(seed_, problem_id, index, 0) < p_pass;
    const int variants =
        1 + static_cast<int>(std::floor(std::max(0.0, temperature) * settings_.variants_per_temperature));
    const int variant = static_cast<int>(mock::uniform(seed_, problem_id, index, 1) * variants);

    const std::string content = "Here is the implementation.\n\n```verilog\n" +
                                mock::candidate_module(variant, marker, passing) + "\n```\n";
    nlohmann::json reply{
        {"id", request.request_id},
        {"object", "chat.completion"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}},
                      {"finish_reason", "stop"}}}},
        {"usage", {{"prompt_tokens", prompt.size() / 4 + 1},
                   {"completion_tokens", content.size() / 4 + 1}}}};
    return HttpReply{200, reply.dump(), false, {}};
  }

 private:
  MockSettings settings_;
  std::uint64_t seed_;
  std::map<std::string, std::string> markers_;
};

// Chat-completions reply body wrapping `content`; handy for scripted transports.
inline std::string chat_reply_body(const std::string& content, std::uint64_t prompt_tokens = 0,
                                   std::uint64_t completion_tokens = 0) {
  nlohmann::json reply{
      {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}},
      {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}};
  return reply.dump();
}

}  // namespace hdlscale
