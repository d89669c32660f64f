#pragma once

// Bracketed tool-call DSL: "[GetMusicChords(10, 20)]".
//
//   Call    := '[' Ident '(' ArgList? ')' ']'
//   ArgList := Number (',' Number)*
//   Ident   := [A-Za-z][A-Za-z0-9]*
//   Number  := '-'? digits ('.' digits)?
//
// Spaces are allowed around every token inside a call.

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "omk/audio.hpp"

namespace omk::toolcall {

/// Decimal literal kept in canonical form ("10.0" -> "10", "-0" -> "0",
/// "2.50" -> "2.5"), so equality is exact decimal equality.
class Number {
public:
  static Number parse(std::string_view literal); // throws omk::Error
  static Number from_double(double v, int decimals = 6);

  const std::string& canonical() const { return canonical_; }
  double value() const { return value_; }

  friend bool operator==(const Number& a, const Number& b) { return a.canonical_ == b.canonical_; }

private:
  std::string canonical_;
  double value_ = 0.0;
};

struct ToolCallExpr {
  std::string name;
  std::vector<Number> args;

  friend bool operator==(const ToolCallExpr&, const ToolCallExpr&) = default;
};

/// Canonical rendering with ", " between arguments.
std::string render(const ToolCallExpr& call);

struct LocatedCall {
  ToolCallExpr call;
  std::size_t begin = 0; // offset of '['
  std::size_t end = 0;   // one past ']'
};

struct Diagnostic {
  std::size_t offset = 0;
  std::string message;
};

struct ParseResult {
  std::vector<LocatedCall> calls;
  std::vector<Diagnostic> diagnostics;

  std::vector<ToolCallExpr> exprs() const;
};

/// Scans free text for calls in textual order. Brackets that do not start
/// with `[Ident(` are ignored; a candidate that does but is malformed is
/// skipped and reported as a diagnostic.
ParseResult parse_calls(std::string_view text);

enum class Verdict { hit, miss };
enum class Reason { exact, wrong_name, wrong_args, extra_call, missing_call, parse_failure };

std::string_view to_string(Reason r);

struct Score {
  Verdict verdict = Verdict::miss;
  Reason reason = Reason::parse_failure;
};

/// Order-sensitive comparison of two call sequences; first difference wins.
Score compare_calls(const std::vector<ToolCallExpr>& predicted, const std::vector<ToolCallExpr>& gold);

/// Parses both texts and compares the call sequences. Throws omk::Error when
/// the gold text contains no call.
Score score_tool_use(std::string_view prediction, std::string_view gold);

struct ToolUseSummary {
  double accuracy = 0.0;
  std::size_t n_items = 0;
  std::map<Reason, std::size_t> per_reason;
};

ToolUseSummary summarize(const std::vector<Score>& scores);
nlohmann::ordered_json summary_to_json(const ToolUseSummary& s);

// Registry and execution

using Estimator = std::function<std::string(const audio::WaveformClip&, std::span<const double>)>;

struct ToolSpec {
  std::string name;
  std::size_t arity = 0;
  std::string argument_semantics;
  Estimator run;
};

class ToolRegistry {
public:
  void add(ToolSpec spec); // throws on duplicate names
  const ToolSpec* find(std::string_view name) const;
  std::vector<std::string> names() const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

private:
  std::map<std::string, ToolSpec, std::less<>> tools_;
};

/// EstimateTempo/0, GetMusicChords/2, GetKey/0, GetDownbeats/0 backed by the
/// native estimators.
ToolRegistry default_registry();

/// Names and arities of the default registry (no estimator instances).
const std::vector<std::pair<std::string, std::size_t>>& default_tool_signatures();

/// Replaces each call, in textual order, by its estimator's rendered result.
/// Unknown tools, arity mismatches and estimator failures throw omk::Error
/// naming the call site.
std::string execute_and_render(std::string_view text, const ToolRegistry& registry,
                               const audio::WaveformClip& clip);

} // namespace omk::toolcall
