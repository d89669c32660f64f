#include <algorithm>
#include <array>

#include "omk/bench.hpp"
#include "omk/error.hpp"
#include "omk/io.hpp"

namespace omk::bench {

namespace {

constexpr std::array<std::string_view, 5> kTaskNames{"captioning", "reasoning", "lyrics", "tool_use",
                                                     "multiple_choice"};
constexpr std::array<const char*, 5> kKeys{"instruction", "output", "local_audio_path", "task", "dataset"};

} // namespace

std::string_view to_string(Task t) { return kTaskNames[static_cast<std::size_t>(t)]; }

std::optional<Task> parse_task(std::string_view s) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == s) {
      return static_cast<Task>(i);
    }
  }
  return std::nullopt;
}

BenchRecord make_record(std::string instruction, std::string output, std::string audio_path, Task task,
                        std::string dataset) {
  if (instruction.empty() || output.empty() || audio_path.empty() || dataset.empty()) {
    throw Error("benchmark record fields must be non-empty");
  }
  return {std::move(instruction), std::move(output), std::move(audio_path), task, std::move(dataset)};
}

BenchRecord make_record(std::string instruction, std::string output, std::string audio_path, std::string_view task,
                        std::string dataset) {
  const auto t = parse_task(task);
  if (!t) {
    throw Error("invalid task \"" + std::string(task) + "\"");
  }
  return make_record(std::move(instruction), std::move(output), std::move(audio_path), *t, std::move(dataset));
}

nlohmann::ordered_json record_to_json(const BenchRecord& r) {
  nlohmann::ordered_json j;
  j["instruction"] = r.instruction;
  j["output"] = r.output;
  j["local_audio_path"] = r.local_audio_path;
  j["task"] = std::string(to_string(r.task));
  j["dataset"] = r.dataset;
  return j;
}

BenchRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw Error("record must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw Error("record has unexpected key \"" + key + "\"");
    }
  }
  std::array<std::string, 5> v;
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    auto it = j.find(kKeys[i]);
    if (it == j.end()) {
      throw Error(std::string("record lacks key \"") + kKeys[i] + "\"");
    }
    if (!it->is_string()) {
      throw Error(std::string("record key \"") + kKeys[i] + "\" must be a string");
    }
    v[i] = it->get<std::string>();
  }
  return make_record(v[0], v[1], v[2], std::string_view(v[3]), v[4]);
}

std::string records_to_jsonl(const std::vector<BenchRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<BenchRecord> read_records(const std::filesystem::path& path) {
  std::vector<BenchRecord> out;
  for (const auto& line : io::read_jsonl(path)) {
    try {
      out.push_back(record_from_json(line.value));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<BenchRecord> build_records(const std::vector<ClipMetadata>& clips, const AnnotationClient& client,
                                       const std::vector<PromptTemplate>& templates, const BuildOptions& options,
                                       const TempoTermTable& tempo, const TagRules& rules) {
  const auto& tmpl = find_template(templates, options.template_name);
  std::vector<std::string> prompts;
  prompts.reserve(clips.size());
  for (const auto& c : clips) {
    prompts.push_back(render_prompt(tmpl, normalize_metadata(c, tempo, rules)));
  }
  const auto outcomes = annotate_all(client, prompts, options.max_in_flight);
  std::vector<BenchRecord> records;
  records.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (const auto* f = std::get_if<AnnotationFailure>(&outcomes[i])) {
      throw Error("annotation of " + clips[i].audio_filename + " failed (" + std::string(to_string(f->kind)) +
                  "): " + f->message);
    }
    const auto& a = std::get<Annotation>(outcomes[i]);
    records.push_back(make_record(a.instruction, a.output, clips[i].audio_filename, options.task,
                                  clips[i].dataset_name));
  }
  return records;
}

} // namespace omk::bench
