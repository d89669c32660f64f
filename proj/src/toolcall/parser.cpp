#include <cctype>
#include <cmath>
#include <cstdio>

#include "omk/error.hpp"
#include "omk/toolcall.hpp"

namespace omk::toolcall {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

bool valid_literal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') {
    ++i;
  }
  const std::size_t int_start = i;
  while (i < s.size() && is_digit(s[i])) {
    ++i;
  }
  if (i == int_start) {
    return false;
  }
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t frac_start = i;
    while (i < s.size() && is_digit(s[i])) {
      ++i;
    }
    if (i == frac_start) {
      return false;
    }
  }
  return i == s.size();
}

class Cursor {
public:
  Cursor(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  void skip_spaces() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
      ++pos_;
    }
  }
  bool eat(char c) {
    skip_spaces();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool peek(char c) {
    skip_spaces();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  std::string ident() {
    skip_spaces();
    std::size_t start = pos_;
    if (pos_ < text_.size() && is_alpha(text_[pos_])) {
      ++pos_;
      while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) {
        ++pos_;
      }
    }
    return std::string(text_.substr(start, pos_ - start));
  }
  std::string number_literal() {
    skip_spaces();
    std::size_t start = pos_;
    while (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.' || text_[pos_] == '-')) {
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }
  std::size_t pos() const { return pos_; }

private:
  std::string_view text_;
  std::size_t pos_;
};

} // namespace

Number Number::parse(std::string_view literal) {
  if (!valid_literal(literal)) {
    throw Error("invalid number literal '" + std::string(literal) + "'");
  }
  bool negative = literal.front() == '-';
  if (negative) {
    literal.remove_prefix(1);
  }
  const auto dot = literal.find('.');
  std::string integral(literal.substr(0, dot));
  std::string fraction = dot == std::string_view::npos ? std::string() : std::string(literal.substr(dot + 1));
  integral.erase(0, std::min(integral.find_first_not_of('0'), integral.size() - 1));
  while (!fraction.empty() && fraction.back() == '0') {
    fraction.pop_back();
  }
  if (integral == "0" && fraction.empty()) {
    negative = false;
  }
  Number n;
  n.canonical_ = (negative ? "-" : "") + integral + (fraction.empty() ? "" : "." + fraction);
  n.value_ = std::stod(n.canonical_);
  return n;
}

Number Number::from_double(double v, int decimals) {
  if (!std::isfinite(v)) {
    throw Error("tool-call arguments must be finite");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return parse(buf);
}

std::string render(const ToolCallExpr& call) {
  std::string out = "[" + call.name + "(";
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += call.args[i].canonical();
  }
  out += ")]";
  return out;
}

std::vector<ToolCallExpr> ParseResult::exprs() const {
  std::vector<ToolCallExpr> out;
  out.reserve(calls.size());
  for (const auto& c : calls) {
    out.push_back(c.call);
  }
  return out;
}

ParseResult parse_calls(std::string_view text) {
  ParseResult result;
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    Cursor cur(text, pos + 1);
    ToolCallExpr call;
    call.name = cur.ident();
    if (call.name.empty() || !cur.eat('(')) {
      ++pos; // ordinary bracket, not a call candidate
      continue;
    }
    auto fail = [&](std::string msg) {
      result.diagnostics.push_back({pos, "malformed call to " + call.name + ": " + std::move(msg)});
      ++pos;
    };
    bool ok = true;
    if (!cur.peek(')')) {
      while (true) {
        const std::string lit = cur.number_literal();
        if (!valid_literal(lit)) {
          fail("expected a number, got '" + lit + "'");
          ok = false;
          break;
        }
        call.args.push_back(Number::parse(lit));
        if (cur.eat(',')) {
          continue;
        }
        break;
      }
    }
    if (!ok) {
      continue;
    }
    if (!cur.eat(')')) {
      fail("expected ')'");
      continue;
    }
    if (!cur.eat(']')) {
      fail("expected ']'");
      continue;
    }
    result.calls.push_back({std::move(call), pos, cur.pos()});
    pos = cur.pos();
  }
  return result;
}

} // namespace omk::toolcall
