#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hdlscale/core/error.hpp"

// Minimal reader for the TOML subset used by campaign config files:
// [section.sub."quoted"] headers, key = value, basic/literal strings,
// integers, floats, booleans and (possibly multi-line) arrays of scalars.
// Keys are flattened to "section.sub.key".
namespace hdlscale::toml {

struct Value {
  enum class Kind { String, Integer, Float, Bool, Array } kind = Kind::String;
  std::string str;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> items;

  bool is_number() const { return kind == Kind::Integer || kind == Kind::Float; }
  double as_double() const { return kind == Kind::Integer ? static_cast<double>(integer) : real; }
};

using Table = std::map<std::string, Value>;

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Table parse() {
    Table table;
    std::string prefix;
    while (skip_blank_lines(), pos_ < text_.size()) {
      if (peek() == '[') {
        ++pos_;
        prefix = parse_dotted_key(']');
        expect(']');
        finish_line();
        continue;
      }
      std::string key = parse_dotted_key('=');
      skip_ws();
      expect('=');
      skip_ws();
      Value v = parse_value();
      finish_line();
      std::string full = prefix.empty() ? key : prefix + "." + key;
      if (!table.emplace(full, std::move(v)).second) fail("duplicate key '" + full + "'");
    }
    return table;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    int line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw Error(Errc::InvalidConfig, "config line " + std::to_string(line) + ": " + msg);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() != '\n') return;
      ++pos_;
    }
  }

  void finish_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (pos_ < text_.size() && peek() != '\n') fail("trailing characters");
    if (pos_ < text_.size()) ++pos_;
  }

  std::string parse_key_part() {
    skip_ws();
    if (peek() == '"' || peek() == '\'') return parse_string();
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        out.push_back(c);
        ++pos_;
      } else {
        break;
      }
    }
    if (out.empty()) fail("expected key");
    return out;
  }

  std::string parse_dotted_key(char terminator) {
    std::string key = parse_key_part();
    for (;;) {
      skip_ws();
      if (peek() != '.') break;
      ++pos_;
      key += "." + parse_key_part();
    }
    skip_ws();
    if (peek() != terminator) fail(std::string("expected '") + terminator + "'");
    return key;
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != quote) {
      char c = text_[pos_++];
      if (c == '\n') fail("unterminated string");
      if (c == '\\' && quote == '"') {
        if (pos_ >= text_.size()) break;
        char e = text_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Value parse_value() {
    Value v;
    char c = peek();
    if (c == '"' || c == '\'') {
      v.kind = Value::Kind::String;
      v.str = parse_string();
      return v;
    }
    if (c == '[') {
      ++pos_;
      v.kind = Value::Kind::Array;
      for (;;) {
        skip_blank_lines();
        if (peek() == ']') {
          ++pos_;
          return v;
        }
        v.items.push_back(parse_value());
        skip_blank_lines();
        if (peek() == ',') {
          ++pos_;
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
           text_[pos_] != '#' && text_[pos_] != '\n' && text_[pos_] != '\r' &&
           text_[pos_] != ' ' && text_[pos_] != '\t')
      ++pos_;
    std::string word(text_.substr(start, pos_ - start));
    if (word == "true" || word == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = word == "true";
      return v;
    }
    std::string digits;
    for (char ch : word)
      if (ch != '_') digits.push_back(ch);
    if (digits.empty()) fail("expected value");
    const char* first = digits.data();
    const char* last = first + digits.size();
    if (*first == '+') ++first;
    if (digits.find_first_of(".eE") == std::string::npos) {
      auto [ptr, ec] = std::from_chars(first, last, v.integer);
      if (ec == std::errc() && ptr == last) {
        v.kind = Value::Kind::Integer;
        return v;
      }
    }
    auto [ptr, ec] = std::from_chars(first, last, v.real);
    if (ec != std::errc() || ptr != last) fail("bad value '" + word + "'");
    v.kind = Value::Kind::Float;
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Table parse(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace hdlscale::toml
