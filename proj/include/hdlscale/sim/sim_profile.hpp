#pragma once

#include <cctype>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "hdlscale/core/error.hpp"

namespace hdlscale {

// Command templates are argv arrays; placeholders are substituted per token
// and never interpreted by a shell.
struct SimProfile {
  std::string name;
  std::vector<std::string> compile_cmd;  // may use {code} {tb} {out}
  std::vector<std::string> run_cmd;      // may use {out}
  std::string default_pass_regex;
  std::string default_fail_regex;
  int timeout_s = 60;

  friend bool operator==(const SimProfile&, const SimProfile&) = default;
};

// Compiles a regex, honouring a leading "(?i)" as a case-insensitive flag.
inline std::regex compile_sentinel_regex(std::string_view pattern) {
  auto flags = std::regex::ECMAScript;
  if (pattern.substr(0, 4) == "(?i)") {
    flags |= std::regex::icase;
    pattern.remove_prefix(4);
  }
  try {
    return std::regex(std::string(pattern), flags);
  } catch (const std::regex_error& e) {
    throw Error(Errc::InvalidConfig, "bad regex '" + std::string(pattern) + "': " + e.what());
  }
}

namespace detail {

inline void check_placeholders(const std::vector<std::string>& argv,
                               const std::vector<std::string_view>& allowed,
                               const std::string& what) {
  for (const auto& arg : argv) {
    for (std::size_t open = arg.find('{'); open != std::string::npos;
         open = arg.find('{', open + 1)) {
      auto close = arg.find('}', open);
      if (close == std::string::npos) continue;
      std::string_view name(arg.data() + open, close - open + 1);
      bool ident = true;
      for (char c : name.substr(1, name.size() - 2))
        ident = ident && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
      if (!ident || name.size() < 3) continue;
      bool ok = false;
      for (auto a : allowed) ok = ok || a == name;
      if (!ok)
        throw Error(Errc::InvalidConfig, what + " uses undeclared placeholder " + std::string(name));
    }
  }
}

}  // namespace detail

inline void validate_sim_profile(const SimProfile& p) {
  if (p.compile_cmd.empty() || p.run_cmd.empty())
    throw Error(Errc::InvalidConfig, "sim profile '" + p.name + "': empty command template");
  if (p.timeout_s <= 0)
    throw Error(Errc::InvalidConfig, "sim profile '" + p.name + "': timeout_s must be positive");
  detail::check_placeholders(p.compile_cmd, {"{code}", "{tb}", "{out}"},
                             "sim profile '" + p.name + "' compile_cmd");
  detail::check_placeholders(p.run_cmd, {"{out}"}, "sim profile '" + p.name + "' run_cmd");
  compile_sentinel_regex(p.default_pass_regex);
  compile_sentinel_regex(p.default_fail_regex);
}

inline SimProfile icarus_sim_profile() {
  SimProfile p;
  p.name = "icarus";
  p.compile_cmd = {"iverilog", "-g2012", "-o", "{out}", "{code}", "{tb}"};
  p.run_cmd = {"vvp", "{out}"};
  p.default_pass_regex = R"((?i)all\s+tests?\s+passed|Mismatches: 0)";
  // "Mismatches: 0" must not trip the fail sentinel.
  p.default_fail_regex = R"((?i)mismatches:\s*[1-9]|assertion failed|error)";
  p.timeout_s = 60;
  return p;
}

// Testbench line naming the identifier a mock candidate must declare to pass.
inline constexpr std::string_view kMockMarkerTag = "MOCK_MARKER:";
inline constexpr std::string_view kMockDefaultMarker = "mock_pass_marker";

inline std::string mock_marker_for(std::string_view testbench) {
  auto pos = testbench.find(kMockMarkerTag);
  if (pos == std::string_view::npos) return std::string(kMockDefaultMarker);
  pos += kMockMarkerTag.size();
  while (pos < testbench.size() && std::isspace(static_cast<unsigned char>(testbench[pos]))) ++pos;
  std::string marker;
  while (pos < testbench.size() &&
         (std::isalnum(static_cast<unsigned char>(testbench[pos])) || testbench[pos] == '_'))
    marker.push_back(testbench[pos++]);
  return marker.empty() ? std::string(kMockDefaultMarker) : marker;
}

// Deterministic oracle: compile fails without `endmodule`; the run passes iff
// the candidate contains the testbench's marker as a whole word.
inline SimProfile mock_sim_profile() {
  SimProfile p;
  p.name = "mock";
  p.compile_cmd = {
      "sh", "-c",
      "grep -q endmodule \"$1\" || { echo \"$1: syntax error: missing endmodule\" >&2; exit 1; }\n"
      "m=$(sed -n 's/.*MOCK_MARKER:[[:space:]]*\\([A-Za-z0-9_]*\\).*/\\1/p' \"$2\" | head -n 1)\n"
      "[ -n \"$m\" ] || m=mock_pass_marker\n"
      "if grep -qw \"$m\" \"$1\"; then echo PASS > \"$3\"; else echo FAIL > \"$3\"; fi\n",
      "mock-compile", "{code}", "{tb}", "{out}"};
  p.run_cmd = {"sh", "-c",
               "if grep -q PASS \"$1\"; then echo 'All tests passed'; "
               "else echo 'Mismatches: 1 in 20 samples'; fi",
               "mock-run", "{out}"};
  p.default_pass_regex = R"((?i)all\s+tests?\s+passed)";
  p.default_fail_regex = R"((?i)mismatches:\s*[1-9])";
  p.timeout_s = 30;
  return p;
}

}  // namespace hdlscale
