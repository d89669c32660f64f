#include "omk/error.hpp"
#include "omk/toolcall.hpp"

namespace omk::toolcall {

std::string_view to_string(Reason r) {
  switch (r) {
  case Reason::exact:
    return "exact";
  case Reason::wrong_name:
    return "wrong_name";
  case Reason::wrong_args:
    return "wrong_args";
  case Reason::extra_call:
    return "extra_call";
  case Reason::missing_call:
    return "missing_call";
  case Reason::parse_failure:
    return "parse_failure";
  }
  return "unknown";
}

Score compare_calls(const std::vector<ToolCallExpr>& predicted, const std::vector<ToolCallExpr>& gold) {
  const std::size_t common = std::min(predicted.size(), gold.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (predicted[i].name != gold[i].name) {
      return {Verdict::miss, Reason::wrong_name};
    }
    if (predicted[i].args != gold[i].args) {
      return {Verdict::miss, Reason::wrong_args};
    }
  }
  if (predicted.size() > gold.size()) {
    return {Verdict::miss, Reason::extra_call};
  }
  if (predicted.size() < gold.size()) {
    return {Verdict::miss, Reason::missing_call};
  }
  return {Verdict::hit, Reason::exact};
}

Score score_tool_use(std::string_view prediction, std::string_view gold) {
  const auto gold_parse = parse_calls(gold);
  if (gold_parse.calls.empty()) {
    throw Error("score_tool_use: gold answer contains no tool call");
  }
  const auto pred_parse = parse_calls(prediction);
  if (pred_parse.calls.empty() && !pred_parse.diagnostics.empty()) {
    return {Verdict::miss, Reason::parse_failure};
  }
  return compare_calls(pred_parse.exprs(), gold_parse.exprs());
}

ToolUseSummary summarize(const std::vector<Score>& scores) {
  ToolUseSummary s;
  s.n_items = scores.size();
  for (auto r : {Reason::exact, Reason::wrong_name, Reason::wrong_args, Reason::extra_call, Reason::missing_call,
                 Reason::parse_failure}) {
    s.per_reason[r] = 0;
  }
  std::size_t hits = 0;
  for (const auto& sc : scores) {
    ++s.per_reason[sc.reason];
    hits += sc.verdict == Verdict::hit ? 1 : 0;
  }
  s.accuracy = scores.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(scores.size());
  return s;
}

nlohmann::ordered_json summary_to_json(const ToolUseSummary& s) {
  nlohmann::ordered_json j;
  j["accuracy"] = 100.0 * s.accuracy;
  j["n_items"] = s.n_items;
  nlohmann::ordered_json reasons;
  for (const auto& [r, n] : s.per_reason) {
    reasons[std::string(to_string(r))] = n;
  }
  j["per_reason_counts"] = reasons;
  return j;
}

} // namespace omk::toolcall
