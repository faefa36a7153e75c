#pragma once

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/types.hpp"

namespace hdlscale {

// Zero-shot instruction preambles, pinned by version so campaigns are
// reproducible. Prompts carry no examples, testbench or reference code.
inline std::string_view prompt_preamble(std::string_view version) {
  if (version == "v1") {
    return "You are an expert digital hardware designer. Implement the Verilog module described "
           "by the specification below.\n"
           "Respond with exactly one fenced code block that starts with ```verilog and ends with "
           "```. The block must contain a single, complete, self-contained module, from `module` "
           "to `endmodule`. Do not instantiate other modules and do not write a testbench.\n"
           "\n"
           "Specification:\n";
  }
  throw Error(Errc::InvalidConfig, "unknown prompt version '" + std::string(version) + "'");
}

inline std::string build_prompt(const Problem& problem, std::string_view version = "v1") {
  std::string prompt(prompt_preamble(version));
  prompt += problem.spec_text;
  return prompt;
}

namespace detail {

inline const std::regex& module_keyword() {
  static const std::regex re(R"(\bmodule\b)");
  return re;
}
inline const std::regex& endmodule_keyword() {
  static const std::regex re(R"(\bendmodule\b)");
  return re;
}

// Position of the first `module` and the end of the last `endmodule` after it.
inline std::optional<std::pair<std::size_t, std::size_t>> module_span(const std::string& text) {
  std::smatch m;
  if (!std::regex_search(text, m, module_keyword())) return std::nullopt;
  const std::size_t begin = static_cast<std::size_t>(m.position(0));
  std::optional<std::size_t> end;
  for (auto it = std::sregex_iterator(text.begin() + static_cast<std::ptrdiff_t>(begin),
                                      text.end(), endmodule_keyword());
       it != std::sregex_iterator(); ++it)
    end = begin + static_cast<std::size_t>(it->position(0) + it->length(0));
  if (!end) return std::nullopt;
  return std::make_pair(begin, *end);
}

struct FencedBlock {
  std::string info;
  std::string body;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// CommonMark-style backtick fences: an opening line of >= 3 backticks plus an
// info string, closed by a line of at least as many backticks. An unclosed
// fence runs to the end of the text.
inline std::vector<FencedBlock> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  auto fence_len = [](std::string_view line) -> std::size_t {
    std::size_t indent = 0;
    while (indent < line.size() && indent < 3 && line[indent] == ' ') ++indent;
    std::size_t n = 0;
    while (indent + n < line.size() && line[indent + n] == '`') ++n;
    return n >= 3 ? n : 0;
  };

  std::vector<FencedBlock> blocks;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t open = fence_len(lines[i]);
    if (!open) continue;
    std::string_view rest = trim(lines[i]).substr(open);
    if (rest.find('`') != std::string_view::npos) continue;  // inline code, not a fence
    FencedBlock block;
    block.info = std::string(trim(rest));
    std::vector<std::string_view> body;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      std::size_t close = fence_len(lines[j]);
      if (close >= open && trim(lines[j]).size() == close) break;
      body.push_back(lines[j]);
    }
    for (std::size_t k = 0; k < body.size(); ++k) {
      if (k) block.body.push_back('\n');
      block.body.append(body[k]);
    }
    blocks.push_back(std::move(block));
    i = j;
  }
  return blocks;
}

inline bool verilog_info(std::string info) {
  auto space = info.find_first_of(" \t{");
  if (space != std::string::npos) info.resize(space);
  for (auto& c : info) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return info.empty() || info == "verilog" || info == "systemverilog";
}

}  // namespace detail

// Returns the body of the last fenced block tagged as Verilog (or untagged)
// that contains a module...endmodule pair. Without such a block, falls back
// to the span from the first `module` through the last `endmodule`.
inline std::optional<std::string> try_extract_code(std::string_view raw) {
  auto blocks = detail::fenced_blocks(raw);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    if (!detail::verilog_info(it->info)) continue;
    if (detail::module_span(it->body)) return it->body;
  }
  std::string text(raw);
  if (auto span = detail::module_span(text)) return text.substr(span->first, span->second - span->first);
  return std::nullopt;
}

inline std::string extract_code(std::string_view raw) {
  if (auto code = try_extract_code(raw)) return *code;
  throw Error(Errc::ExtractError, "no module...endmodule found in response");
}

}  // namespace hdlscale
