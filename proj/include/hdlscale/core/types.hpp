#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "hdlscale/core/error.hpp"
#include "hdlscale/util/time.hpp"

namespace hdlscale {

// One benchmark task.
struct Problem {
  std::string id;
  std::string spec_text;
  std::string testbench_source;
  std::optional<std::string> ref_code;
  std::set<std::string> tags;
  std::string suite;
  // Per-problem overrides of the simulator profile's sentinel regexes.
  std::optional<std::string> pass_regex;
  std::optional<std::string> fail_regex;

  bool has_tag(std::string_view tag) const { return tags.count(std::string(tag)) != 0; }

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct GenerationParams {
  std::string model_id;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_output_tokens = 2048;
  std::string provider_profile = "default";

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

enum class VerdictKind { Pass, CompileError, SimFail, SimTimeout, ExtractError, ProviderError };

constexpr std::string_view to_string(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::Pass: return "Pass";
    case VerdictKind::CompileError: return "CompileError";
    case VerdictKind::SimFail: return "SimFail";
    case VerdictKind::SimTimeout: return "SimTimeout";
    case VerdictKind::ExtractError: return "ExtractError";
    case VerdictKind::ProviderError: return "ProviderError";
  }
  return "?";
}

inline VerdictKind verdict_kind_from_string(std::string_view s) {
  for (auto k : {VerdictKind::Pass, VerdictKind::CompileError, VerdictKind::SimFail,
                 VerdictKind::SimTimeout, VerdictKind::ExtractError, VerdictKind::ProviderError}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::Io, "unknown verdict kind '" + std::string(s) + "'");
}

struct Verdict {
  VerdictKind kind = VerdictKind::SimFail;
  std::string detail;

  bool passed() const { return kind == VerdictKind::Pass; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct UsageRecord {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  UsageRecord& operator+=(const UsageRecord& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  friend bool operator==(const UsageRecord&, const UsageRecord&) = default;
};

// One generation attempt. `index` is 1-based and dense per problem.
struct Sample {
  std::string problem_id;
  int index = 1;
  std::string raw_response;
  std::optional<std::string> extracted_code;
  Verdict verdict;
  UsageRecord usage;
  std::int64_t latency_ms = 0;
  GenerationParams params;
  Timestamp created_at{};

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class StopMode { EarlyStop, FixedN };

constexpr std::string_view to_string(StopMode mode) {
  return mode == StopMode::EarlyStop ? "early_stop" : "fixed_n";
}

struct Price {
  double usd_per_1m_input = 0.0;
  double usd_per_1m_output = 0.0;

  friend bool operator==(const Price&, const Price&) = default;
};

// model_id -> price per million tokens
using PricingTable = std::map<std::string, Price>;

}  // namespace hdlscale
