#include "doctest.h"
#include "omk/error.hpp"
#include "omk/rng.hpp"
#include "omk/synth.hpp"
#include "omk/toolcall.hpp"

using namespace omk;
using namespace omk::toolcall;

namespace {

ToolCallExpr call(std::string name, std::vector<std::string> args = {}) {
  ToolCallExpr c{std::move(name), {}};
  for (const auto& a : args) {
    c.args.push_back(Number::parse(a));
  }
  return c;
}

} // namespace

TEST_CASE("numbers are kept in canonical form") {
  CHECK(Number::parse("10.0").canonical() == "10");
  CHECK(Number::parse("-0").canonical() == "0");
  CHECK(Number::parse("-0.000").canonical() == "0");
  CHECK(Number::parse("2.50").canonical() == "2.5");
  CHECK(Number::parse("007").canonical() == "7");
  CHECK(Number::parse("0.25").canonical() == "0.25");
  CHECK(Number::parse("-3.10").canonical() == "-3.1");
  CHECK(Number::parse("10") == Number::parse("10.000"));
  CHECK_FALSE(Number::parse("10") == Number::parse("10.5"));
  for (const char* bad : {"", "-", "1.", ".5", "1e3", "1..2", "--1", "abc"}) {
    CHECK_THROWS_AS(Number::parse(bad), Error);
  }
  CHECK(Number::from_double(120.0).canonical() == "120");
  CHECK(Number::from_double(0.126, 2).canonical() == "0.13");
}

TEST_CASE("render uses comma-space separators") {
  CHECK(render(call("GetMusicChords", {"0", "10.0"})) == "[GetMusicChords(0, 10)]");
  CHECK(render(call("EstimateTempo")) == "[EstimateTempo()]");
}

TEST_CASE("calls are found in free text in order") {
  const auto r = parse_calls("Chords [GetMusicChords(0,10)] then [ EstimateTempo ( ) ] and [note] [x]");
  REQUIRE(r.calls.size() == 2);
  CHECK(r.diagnostics.empty());
  CHECK(r.calls[0].call == call("GetMusicChords", {"0", "10"}));
  CHECK(r.calls[0].begin == 7);
  CHECK(r.calls[1].call.name == "EstimateTempo");
}

TEST_CASE("malformed candidates are skipped with a diagnostic") {
  const auto r = parse_calls("[GetKey(abc)] [GetKey(1,)] [GetKey(1] [GetKey(1)");
  CHECK(r.calls.empty());
  CHECK(r.diagnostics.size() == 4);
  const auto ok = parse_calls("[GetKey(1.5.2)] [GetKey()]");
  CHECK(ok.calls.size() == 1);
  CHECK(ok.diagnostics.size() == 1);
}

TEST_CASE("render and parse round trip") {
  Rng rng(17);
  const std::vector<std::string> names{"EstimateTempo", "GetMusicChords", "GetKey", "GetDownbeats", "X1"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ToolCallExpr> calls;
    std::string text = "prefix ";
    const auto n = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < n; ++i) {
      ToolCallExpr c{names[rng.below(names.size())], {}};
      const auto arity = rng.below(4);
      for (std::uint64_t k = 0; k < arity; ++k) {
        c.args.push_back(Number::from_double(rng.uniform(-100.0, 100.0), static_cast<int>(rng.below(4))));
      }
      text += render(c) + " words ";
      calls.push_back(c);
    }
    const auto parsed = parse_calls(text);
    CHECK(parsed.diagnostics.empty());
    CHECK(parsed.exprs() == calls);
  }
}

TEST_CASE("scoring verdicts") {
  const std::string gold = "Here are the chords between 0 sec and 10 sec: [GetMusicChords(0, 10)].";
  CHECK(score_tool_use(gold, gold).verdict == Verdict::hit);
  CHECK(score_tool_use("[GetMusicChords(0.0, 10.00)]", gold).reason == Reason::exact);
  CHECK(score_tool_use("[GetMusicChord(0, 10)]", gold).reason == Reason::wrong_name);
  CHECK(score_tool_use("[GetMusicChords(0, 11)]", gold).reason == Reason::wrong_args);
  CHECK(score_tool_use("[GetMusicChords(0)]", gold).reason == Reason::wrong_args);
  CHECK(score_tool_use("[GetMusicChords(0, 10)] [GetKey()]", gold).reason == Reason::extra_call);
  CHECK(score_tool_use("no call at all", gold).reason == Reason::missing_call);
  CHECK(score_tool_use("[GetMusicChords(a, b)]", gold).reason == Reason::parse_failure);
  CHECK_THROWS_AS(score_tool_use("[GetKey()]", "no call"), Error);
}

TEST_CASE("order matters") {
  const auto a = call("GetKey");
  const auto b = call("EstimateTempo");
  CHECK(compare_calls({a, b}, {a, b}).verdict == Verdict::hit);
  CHECK(compare_calls({b, a}, {a, b}).reason == Reason::wrong_name);
  CHECK(compare_calls({a}, {a, b}).reason == Reason::missing_call);
}

TEST_CASE("every single-character name corruption is a miss") {
  const std::string gold = "[GetDownbeats()]";
  const std::string name = "GetDownbeats";
  for (std::size_t i = 0; i < name.size(); ++i) {
    for (char c : {'a', 'Z', '0', '-', ' '}) {
      if (name[i] == c) {
        continue;
      }
      auto bad = name;
      bad[i] = c;
      CHECK(score_tool_use("[" + bad + "()]", gold).verdict == Verdict::miss);
    }
  }
}

TEST_CASE("summary counts reasons") {
  std::vector<Score> s{{Verdict::hit, Reason::exact}, {Verdict::miss, Reason::extra_call},
                       {Verdict::hit, Reason::exact}, {Verdict::miss, Reason::wrong_args}};
  const auto sum = summarize(s);
  CHECK(sum.accuracy == 0.5);
  const auto j = summary_to_json(sum);
  CHECK(j["accuracy"] == 50.0);
  CHECK(j["per_reason_counts"]["exact"] == 2);
  CHECK(j["per_reason_counts"]["parse_failure"] == 0);
}

TEST_CASE("default registry signatures") {
  const auto reg = default_registry();
  for (const auto& [name, arity] : default_tool_signatures()) {
    const auto* spec = reg.find(name);
    REQUIRE(spec != nullptr);
    CHECK(spec->arity == arity);
  }
  CHECK(reg.names().size() == 4);
  ToolRegistry r;
  r.add({"A", 0, "", {}});
  CHECK_THROWS_AS(r.add({"A", 1, "", {}}), Error);
}

TEST_CASE("execute and render replaces calls with results") {
  synth::ClickTrackSpec spec;
  spec.bpm = 120.0;
  const auto clip = synth::click_track(spec);
  const auto reg = default_registry();
  CHECK(execute_and_render("Tempo is [EstimateTempo()] bpm.", reg, clip) == "Tempo is 120.0 bpm.");
  CHECK_THROWS_AS(execute_and_render("[Nope()]", reg, clip), Error);
  CHECK_THROWS_AS(execute_and_render("[EstimateTempo(1)]", reg, clip), Error);
}
