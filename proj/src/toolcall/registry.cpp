#include <cstdio>

#include "omk/error.hpp"
#include "omk/mir.hpp"
#include "omk/toolcall.hpp"

namespace omk::toolcall {

void ToolRegistry::add(ToolSpec spec) {
  if (spec.name.empty()) {
    throw Error("tool name must not be empty");
  }
  const std::string name = spec.name;
  if (!tools_.emplace(name, std::move(spec)).second) {
    throw Error("duplicate tool name " + name);
  }
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : &it->second;
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : tools_) {
    out.push_back(name);
  }
  return out;
}

const std::vector<std::pair<std::string, std::size_t>>& default_tool_signatures() {
  static const std::vector<std::pair<std::string, std::size_t>> sigs{
      {"EstimateTempo", 0}, {"GetMusicChords", 2}, {"GetKey", 0}, {"GetDownbeats", 0}};
  return sigs;
}

ToolRegistry default_registry() {
  ToolRegistry r;
  r.add({"EstimateTempo", 0, "none; returns beats per minute",
         [](const audio::WaveformClip& clip, std::span<const double>) {
           char buf[32];
           std::snprintf(buf, sizeof buf, "%.1f", mir::estimate_tempo(clip));
           return std::string(buf);
         }});
  r.add({"GetMusicChords", 2, "start and end of the analysis window in seconds",
         [](const audio::WaveformClip& clip, std::span<const double> args) {
           std::string out;
           for (const auto& c : mir::recognize_chords(clip, args[0], args[1])) {
             if (!out.empty()) {
               out += ' ';
             }
             out += mir::render(c);
           }
           return out;
         }});
  r.add({"GetKey", 0, "none; returns tonic and mode",
         [](const audio::WaveformClip& clip, std::span<const double>) { return mir::render(mir::detect_key(clip)); }});
  r.add({"GetDownbeats", 0, "none; returns downbeat times in seconds",
         [](const audio::WaveformClip& clip, std::span<const double>) {
           return mir::render_times(mir::track_downbeats(clip).downbeat_times);
         }});
  return r;
}

std::string execute_and_render(std::string_view text, const ToolRegistry& registry,
                               const audio::WaveformClip& clip) {
  const auto parsed = parse_calls(text);
  std::string out;
  std::size_t cursor = 0;
  for (const auto& located : parsed.calls) {
    const auto& call = located.call;
    const std::string site = render(call) + " at offset " + std::to_string(located.begin);
    const ToolSpec* spec = registry.find(call.name);
    if (spec == nullptr) {
      throw Error("unknown tool " + call.name + " (" + site + ")");
    }
    if (spec->arity != call.args.size()) {
      throw Error("tool " + call.name + " expects " + std::to_string(spec->arity) + " argument(s), got " +
                  std::to_string(call.args.size()) + " (" + site + ")");
    }
    std::vector<double> args;
    for (const auto& a : call.args) {
      args.push_back(a.value());
    }
    std::string result;
    try {
      result = spec->run(clip, args);
    } catch (const std::exception& e) {
      throw Error("tool " + call.name + " failed (" + site + "): " + e.what());
    }
    out.append(text.substr(cursor, located.begin - cursor));
    out += result;
    cursor = located.end;
  }
  out.append(text.substr(cursor));
  return out;
}

} // namespace omk::toolcall
