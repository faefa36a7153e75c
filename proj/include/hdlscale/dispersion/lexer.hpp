#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace hdlscale {

struct TokenStream {
  std::vector<std::string> tokens;
  std::string source_hash;  // fnv-1a 64 of the input, hex

  friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

namespace lex {

// Matched longest-first. "(*", "*)" and ".*" are left out so `@(*)` lexes as
// @ ( * ).
inline constexpr std::string_view kOperators[] = {
    "<<<=", ">>>=",
    "<<<", ">>>", "===", "!==", "==?", "!=?", "<->", "->>", "|->", "|=>", "<<=", ">>=",
    "<=", ">=", "==", "!=", "&&", "||", "**", "~&", "~|", "~^", "^~", "<<", ">>", "->",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "++", "--", "::", "+:", "-:", "##",
    "#-#", "#=#", ":=", ":/", "@@", "'{", "&&&"};

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(unsigned char c) { return is_ident_start(c) || is_digit(c) || c == '$'; }
inline bool is_base(unsigned char c) {
  switch (c) {
    case 'b': case 'B': case 'o': case 'O': case 'd': case 'D': case 'h': case 'H': return true;
    default: return false;
  }
}
inline bool is_based_digit(unsigned char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F') || c == 'x' || c == 'X' ||
         c == 'z' || c == 'Z' || c == '?' || c == '_';
}

// Length of a well-formed UTF-8 sequence at s[i], or 0.
inline std::size_t utf8_length(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (b >= 0xC2 && b <= 0xDF) len = 2;
  else if (b >= 0xE0 && b <= 0xEF) len = 3;
  else if (b >= 0xF0 && b <= 0xF4) len = 4;
  else return 0;
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k)
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
  return len;
}

inline std::string hash_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : s_(src) {}

  std::vector<std::string> run() {
    std::vector<std::string> out;
    while (i_ < s_.size()) {
      const auto c = static_cast<unsigned char>(s_[i_]);
      if (is_space(c)) {
        ++i_;
      } else if (starts("//")) {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else if (starts("/*")) {
        auto end = s_.find("*/", i_ + 2);
        i_ = end == std::string_view::npos ? s_.size() : end + 2;
      } else if (is_ident_start(c)) {
        out.emplace_back(take_while(i_, is_ident_char));
      } else if (c == '\\' && i_ + 1 < s_.size() && !is_space(static_cast<unsigned char>(s_[i_ + 1]))) {
        std::size_t j = i_ + 1;
        while (j < s_.size() && !is_space(static_cast<unsigned char>(s_[j]))) ++j;
        out.emplace_back(s_.substr(i_, j - i_));
        i_ = j;
      } else if ((c == '$' || c == '`') && i_ + 1 < s_.size() &&
                 is_ident_char(static_cast<unsigned char>(s_[i_ + 1]))) {
        out.emplace_back(take_while(i_ + 1, is_ident_char, i_));
      } else if (c == '"') {
        out.push_back(string_literal());
      } else if (is_digit(c)) {
        out.push_back(number());
      } else if (c == '\'' && based_at(i_)) {
        out.push_back(based_tail(""));
      } else if (auto op = match_operator(); !op.empty()) {
        out.emplace_back(op);
        i_ += op.size();
      } else if (std::size_t n = utf8_length(s_, i_)) {
        out.emplace_back(s_.substr(i_, n));
        i_ += n;
      } else {
        out.emplace_back(1, static_cast<char>(c));
        ++i_;
      }
    }
    return out;
  }

 private:
  bool starts(std::string_view p) const { return s_.substr(i_, p.size()) == p; }

  std::string_view take_while(std::size_t from, bool (*pred)(unsigned char), std::size_t start = std::string_view::npos) {
    std::size_t j = from;
    while (j < s_.size() && pred(static_cast<unsigned char>(s_[j]))) ++j;
    if (start == std::string_view::npos) start = from;
    std::string_view tok = s_.substr(start, j - start);
    i_ = j;
    return tok;
  }

  std::size_t skip_space(std::size_t j) const {
    while (j < s_.size() && is_space(static_cast<unsigned char>(s_[j]))) ++j;
    return j;
  }

  // A `'` at j starting a base specifier ('b, 'sh, ...) or an SV fill literal ('0 '1 'x 'z).
  bool based_at(std::size_t j) const {
    if (j >= s_.size() || s_[j] != '\'') return false;
    std::size_t k = j + 1;
    if (k < s_.size() && (s_[k] == 's' || s_[k] == 'S')) ++k;
    if (k < s_.size() && is_base(static_cast<unsigned char>(s_[k]))) return true;
    if (k == j + 1 && k < s_.size()) {
      char f = s_[k];
      bool fill = f == '0' || f == '1' || f == 'x' || f == 'X' || f == 'z' || f == 'Z';
      return fill && (k + 1 >= s_.size() || !is_ident_char(static_cast<unsigned char>(s_[k + 1])));
    }
    return false;
  }

  // Consumes from the `'` at i_; whitespace inside the literal is dropped.
  std::string based_tail(std::string prefix) {
    std::string tok = std::move(prefix);
    tok.push_back('\'');
    ++i_;
    if (s_[i_] == 's' || s_[i_] == 'S') tok.push_back(s_[i_++]);
    if (is_base(static_cast<unsigned char>(s_[i_]))) {
      tok.push_back(s_[i_++]);
      std::size_t j = skip_space(i_);
      if (j < s_.size() && is_based_digit(static_cast<unsigned char>(s_[j]))) {
        i_ = j;
        while (i_ < s_.size() && is_based_digit(static_cast<unsigned char>(s_[i_]))) tok.push_back(s_[i_++]);
      }
    } else {
      tok.push_back(s_[i_++]);  // fill literal
    }
    return tok;
  }

  std::string number() {
    std::size_t j = i_;
    while (j < s_.size() && (is_digit(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
    std::string size(s_.substr(i_, j - i_));
    std::size_t k = skip_space(j);
    if (k < s_.size() && s_[k] == '\'' && based_at(k)) {
      std::size_t q = k + 1;
      if (s_[q] == 's' || s_[q] == 'S') ++q;
      if (is_base(static_cast<unsigned char>(s_[q]))) {
        i_ = k;
        return based_tail(size);
      }
    }
    // real: 1.5, 2e-3, 1.0E+2
    if (j + 1 < s_.size() && s_[j] == '.' && is_digit(static_cast<unsigned char>(s_[j + 1]))) {
      ++j;
      while (j < s_.size() && (is_digit(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
    }
    if (j < s_.size() && (s_[j] == 'e' || s_[j] == 'E')) {
      std::size_t e = j + 1;
      if (e < s_.size() && (s_[e] == '+' || s_[e] == '-')) ++e;
      if (e < s_.size() && is_digit(static_cast<unsigned char>(s_[e]))) {
        j = e;
        while (j < s_.size() && (is_digit(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
      }
    }
    std::string tok(s_.substr(i_, j - i_));
    i_ = j;
    return tok;
  }

  // Up to the closing quote; an unterminated literal ends at the newline.
  std::string string_literal() {
    std::size_t j = i_ + 1;
    while (j < s_.size() && s_[j] != '"' && s_[j] != '\n') j += s_[j] == '\\' && j + 1 < s_.size() ? 2 : 1;
    if (j < s_.size() && s_[j] == '"') ++j;
    j = std::min(j, s_.size());
    std::string tok(s_.substr(i_, j - i_));
    i_ = j;
    return tok;
  }

  std::string_view match_operator() const {
    std::string_view best;
    for (auto op : kOperators)
      if (op.size() > best.size() && starts(op)) best = op;
    return best;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace lex

// Total on arbitrary bytes: comments and whitespace vanish, everything else
// becomes at least one token.
inline TokenStream tokenize(std::string_view code) {
  TokenStream ts;
  ts.tokens = lex::Lexer(code).run();
  ts.source_hash = lex::hash_hex(code);
  return ts;
}

}  // namespace hdlscale
