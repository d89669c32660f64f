#include <algorithm>
#include <cstdio>

#include "omk/bench.hpp"
#include "omk/error.hpp"
#include "omk/rng.hpp"
#include "omk/toolcall.hpp"

namespace omk::bench {

namespace {

struct ToolTemplates {
  std::vector<std::string> questions;
  std::string answer; // {call}, {a}, {b}
};

const std::map<std::string, ToolTemplates>& tool_templates() {
  static const std::map<std::string, ToolTemplates> t{
      {"GetMusicChords",
       {{"What chords are played between {a} and {b} seconds?", "Which chords can be heard from {a} sec to {b} sec?",
         "Tell me the chord progression between second {a} and second {b}."},
        "Here are the chords between {a} sec and {b} sec: {call}."}},
      {"EstimateTempo",
       {{"Let me know the tempo of this music clip.", "How fast is this piece in beats per minute?",
         "What is the BPM of this song?"},
        "The music has tempo {call} beats per minute."}},
      {"GetKey",
       {{"What key is this music in?", "Can you identify the key of this clip?", "Which key is this song played in?"},
        "The music is in the key of {call}."}},
      {"GetDownbeats",
       {{"Where are the downbeats in this clip?", "When does each bar start in this music?",
         "Give me the downbeat times of this song."},
        "The downbeats occur at {call} seconds."}}};
  return t;
}

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

} // namespace

std::vector<BenchRecord> build_tool_use_dataset(std::size_t n, std::uint64_t seed,
                                                const std::vector<std::string>& registry_names) {
  if (n == 0) {
    throw Error("tool-use dataset size must be positive");
  }
  if (registry_names.empty()) {
    throw Error("tool-use dataset needs at least one tool name");
  }
  const auto& sigs = toolcall::default_tool_signatures();
  const auto& templates = tool_templates();
  for (const auto& name : registry_names) {
    const bool known = std::any_of(sigs.begin(), sigs.end(), [&](const auto& s) { return s.first == name; });
    if (!known || !templates.contains(name)) {
      throw Error("unknown tool name " + name);
    }
  }

  Rng rng(seed);
  std::vector<BenchRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& name = registry_names[rng.below(registry_names.size())];
    const auto& tmpl = templates.at(name);
    toolcall::ToolCallExpr call{name, {}};
    std::string a, b;
    if (name == "GetMusicChords") {
      const auto start = static_cast<double>(rng.below(21));
      const double span = rng.below(2) == 0 ? 5.0 : 10.0;
      call.args = {toolcall::Number::from_double(start), toolcall::Number::from_double(start + span)};
      a = call.args[0].canonical();
      b = call.args[1].canonical();
    }
    const auto& question = tmpl.questions[rng.below(tmpl.questions.size())];
    auto instruction = substitute(substitute(question, "{a}", a), "{b}", b);
    auto output = substitute(substitute(substitute(tmpl.answer, "{a}", a), "{b}", b), "{call}",
                             toolcall::render(call));
    char path[32];
    std::snprintf(path, sizeof path, "tool_%06zu.wav", i);
    out.push_back(make_record(std::move(instruction), std::move(output), path, Task::tool_use, "tool_use"));
  }
  return out;
}

} // namespace omk::bench
