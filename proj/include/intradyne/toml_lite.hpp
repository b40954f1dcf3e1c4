// Reader for the subset of TOML used by the experiment configs:
// [table] / [a.b] headers, dotted keys, numbers (including inf/nan),
// basic and literal strings, booleans, arrays (may span lines), comments.
// The document is returned as nlohmann::json.
#pragma once

#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace intradyne::toml {

class parse_error : public std::runtime_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : std::runtime_error("TOML line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : s_(src) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        ++i_;
        if (!eof() && peek() == '[') fail("arrays of tables are not supported");
        skip_ws();
        auto path = parse_key_path();
        skip_ws();
        expect(']');
        table = &root;
        for (const auto& k : path) {
          auto& next = (*table)[k];
          if (next.is_null()) next = nlohmann::json::object();
          if (!next.is_object()) fail("key '" + k + "' is not a table");
          table = &next;
        }
        end_of_line();
        continue;
      }
      auto path = parse_key_path();
      skip_ws();
      expect('=');
      skip_ws();
      nlohmann::json value = parse_value();
      nlohmann::json* t = table;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        auto& next = (*t)[path[k]];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) fail("key '" + path[k] + "' is not a table");
        t = &next;
      }
      if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
      (*t)[path.back()] = std::move(value);
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;

  [[noreturn]] void fail(const std::string& msg) const { throw parse_error(line_, msg); }
  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return s_[i_]; }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        if (peek() == '\n') ++line_;
        ++i_;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') ++i_;
    if (eof() || peek() != '\n') fail("unexpected trailing characters");
    ++i_;
    ++line_;
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    while (true) {
      skip_ws();
      if (eof()) fail("expected key");
      if (peek() == '"') {
        path.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        path.push_back(parse_literal_string());
      } else {
        const std::size_t start = i_;
        while (!eof() && bare_char(peek())) ++i_;
        if (i_ == start) fail("expected key");
        path.emplace_back(s_.substr(start, i_ - start));
      }
      skip_ws();
      if (!eof() && peek() == '.') {
        ++i_;
        continue;
      }
      return path;
    }
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[i_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      switch (char e = s_[i_++]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    const std::size_t start = i_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++i_;
    if (eof() || peek() != '\'') fail("unterminated literal string");
    std::string out(s_.substr(start, i_ - start));
    ++i_;
    return out;
  }

  nlohmann::json parse_array() {
    expect('[');
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        ++i_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  nlohmann::json parse_value() {
    if (eof()) fail("expected value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    const std::size_t start = i_;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '#')
      ++i_;
    std::string tok(s_.substr(start, i_ - start));
    if (tok.empty()) fail("expected value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string sign;
    std::string body = tok;
    if (body[0] == '+' || body[0] == '-') {
      sign = body.substr(0, 1);
      body = body.substr(1);
    }
    if (body == "inf") return sign == "-" ? -std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::string clean;
    for (std::size_t k = 0; k < body.size(); ++k) {
      if (body[k] == '_') {
        if (k == 0 || k + 1 == body.size() || !std::isdigit(static_cast<unsigned char>(body[k - 1])) ||
            !std::isdigit(static_cast<unsigned char>(body[k + 1])))
          fail("misplaced underscore in number '" + tok + "'");
        continue;
      }
      clean += body[k];
    }
    if (clean.empty()) fail("invalid value '" + tok + "'");
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    if (!is_float && clean.size() > 2 && clean[0] == '0' && (clean[1] == 'x' || clean[1] == 'X')) {
      std::size_t used = 0;
      const auto v = std::stoll(clean.substr(2), &used, 16);
      if (used != clean.size() - 2) fail("invalid hex integer '" + tok + "'");
      return sign == "-" ? -v : v;
    }
    for (char ch : clean)
      if (!(std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == 'e' || ch == 'E' || ch == '+' ||
            ch == '-'))
        fail("invalid value '" + tok + "'");
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(sign + clean, &used);
        if (used != sign.size() + clean.size()) fail("invalid float '" + tok + "'");
        return v;
      }
      const long long v = std::stoll(sign + clean, &used);
      if (used != sign.size() + clean.size()) fail("invalid integer '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("invalid number '" + tok + "'");
    }
  }
};

}  // namespace detail

inline nlohmann::json parse(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace intradyne::toml
