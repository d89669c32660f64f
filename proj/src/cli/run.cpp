#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "omk/audio.hpp"
#include "omk/bench.hpp"
#include "omk/cli.hpp"
#include "omk/error.hpp"
#include "omk/io.hpp"
#include "omk/metrics.hpp"
#include "omk/mllm.hpp"
#include "omk/toolcall.hpp"

#ifndef OMK_DEFAULT_DATA_DIR
#define OMK_DEFAULT_DATA_DIR "data"
#endif

namespace omk::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kModelTokenizer = "byte-level-258";
constexpr const char* kCheckpointFormat = "omk-checkpoint-v1";

struct Common {
  std::uint64_t seed = 0;
  std::size_t pool_factor = 8;
  std::size_t lora_rank = 16;
  double lora_alpha = 128.0;
  int workers = 0;
  std::string manifest_dir;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub.add_option("--pool-factor", c.pool_factor, "Music-token pooling factor")
      ->capture_default_str()
      ->check(CLI::Validator(
          [](std::string& s) {
            std::size_t v = 0;
            if (!CLI::detail::lexical_cast(s, v) || !audio::is_default_pool_factor(v)) {
              return std::string("pool factor must be a power of two in [1, 128]");
            }
            return std::string();
          },
          "POW2"));
  sub.add_option("--lora-rank", c.lora_rank, "LoRA rank r")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--lora-alpha", c.lora_alpha, "LoRA alpha")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--workers", c.workers, "Worker threads for per-record work (0: all cores)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--manifest-dir", c.manifest_dir, "Where stdout-only commands write their manifest");
}

ojson lora_json(const Common& c) { return {{"rank", c.lora_rank}, {"alpha", c.lora_alpha}}; }

ojson versions() {
  return {{"omk", kVersion},
          {"metric_tokenizer", metrics::kTokenizerVersion},
          {"model_tokenizer", kModelTokenizer},
          {"checkpoint_format", kCheckpointFormat}};
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw UsageError(std::string(what) + " is required");
  }
  if (!fs::is_regular_file(path)) {
    throw Error(std::string(what) + " not found: " + path);
  }
}

struct Context {
  std::vector<std::string> argv;
  std::string command;
  ojson config = ojson::object();
  ojson outputs = ojson::array();
};

void write_output(Context& ctx, const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  io::write_atomic(path, contents);
  ctx.outputs.push_back(path.string());
}

void write_manifest(const Context& ctx, const Common& c, const fs::path& path) {
  ojson m;
  m["command"] = ctx.command;
  m["argv"] = ctx.argv;
  m["config"] = ctx.config;
  m["seed"] = c.seed;
  m["versions"] = versions();
  m["outputs"] = ctx.outputs;
  m["created_at"] = utc_now();
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  io::write_atomic(path, m.dump(2) + "\n");
}

void finish(const Context& ctx, const Common& c, const std::string& primary_output) {
  if (!primary_output.empty()) {
    write_manifest(ctx, c, primary_output + ".manifest.json");
  } else if (!c.manifest_dir.empty()) {
    write_manifest(ctx, c, fs::path(c.manifest_dir) / (ctx.command + ".manifest.json"));
  }
}

std::string id_string(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Data files

struct DataFiles {
  bench::TempoTermTable tempo = bench::TempoTermTable::defaults();
  bench::TagRules rules = bench::TagRules::defaults();
  std::vector<bench::PromptTemplate> templates = bench::default_prompt_templates();
  bench::MockTemplates mock = bench::MockTemplates::defaults();
};

DataFiles load_data(const std::string& dir) {
  DataFiles d;
  const fs::path base = dir;
  if (const auto p = base / "tempo_terms.json"; fs::exists(p)) {
    d.tempo = bench::TempoTermTable::from_json(io::read_json(p));
  }
  if (const auto p = base / "tag_rules.json"; fs::exists(p)) {
    d.rules = bench::TagRules::from_json(io::read_json(p));
  }
  if (const auto p = base / "prompt_templates.json"; fs::exists(p)) {
    d.templates = bench::prompt_templates_from_json(io::read_json(p));
  }
  if (const auto p = base / "mock_templates.json"; fs::exists(p)) {
    d.mock = bench::MockTemplates::from_json(io::read_json(p));
  }
  return d;
}

// build-bench

struct BuildArgs {
  std::string metadata, output, task = "captioning", template_name, annotator = "mock", endpoint, data_dir;
  std::size_t max_in_flight = 4;
  std::string split = "none";
  double train_fraction = 0.8;
  std::string pinned;
  std::size_t test_size = 0;
  std::string train_output, test_output;
  std::size_t tool_use = 0;
  std::vector<std::string> tools;
};

std::vector<bench::BenchRecord> with_suffix(std::vector<bench::BenchRecord> rs, const std::string& suffix) {
  for (auto& r : rs) {
    r.dataset += suffix;
  }
  return rs;
}

int cmd_build_bench(Context& ctx, const Common& c, const BuildArgs& a, std::ostream& out) {
  if (a.output.empty() && a.split == "none") {
    throw UsageError("build-bench needs --output");
  }
  if (a.split != "none" && (a.train_output.empty() || a.test_output.empty())) {
    throw UsageError("--split needs --train-output and --test-output");
  }
  if (a.split == "topup") {
    require_file(a.pinned, "--pinned");
    if (a.test_size == 0) {
      throw UsageError("--split topup needs --test-size");
    }
  }

  std::vector<bench::BenchRecord> records;
  if (a.tool_use > 0) {
    auto names = a.tools;
    if (names.empty()) {
      for (const auto& [name, arity] : toolcall::default_tool_signatures()) {
        names.push_back(name);
      }
    }
    records = bench::build_tool_use_dataset(a.tool_use, c.seed, names);
    ctx.config["tool_use"] = a.tool_use;
    ctx.config["tools"] = names;
  } else {
    require_file(a.metadata, "--metadata");
    const auto task = bench::parse_task(a.task);
    if (!task) {
      throw UsageError("unknown task: " + a.task);
    }
    const auto data = load_data(a.data_dir);
    std::vector<bench::ClipMetadata> clips;
    for (const auto& line : io::read_jsonl(a.metadata)) {
      try {
        clips.push_back(bench::metadata_from_json(line.value));
      } catch (const std::exception& e) {
        throw Error(a.metadata + ":" + std::to_string(line.line_number) + ": " + e.what());
      }
    }
    std::unique_ptr<bench::AnnotationClient> client;
    if (a.annotator == "mock") {
      client = std::make_unique<bench::MockAnnotationClient>(data.mock);
    } else if (a.annotator == "remote") {
      if (a.endpoint.empty()) {
        throw UsageError("--annotator remote needs --endpoint");
      }
      bench::RemoteConfig rc;
      rc.endpoint = a.endpoint;
      rc.token = bench::annotation_token_from_env();
      client = std::make_unique<bench::RemoteAnnotationClient>(rc);
    } else {
      throw UsageError("unknown annotator: " + a.annotator);
    }
    bench::BuildOptions opt;
    opt.task = *task;
    opt.template_name = a.template_name.empty() ? std::string(bench::to_string(*task)) : a.template_name;
    opt.max_in_flight = a.max_in_flight;
    records = bench::build_records(clips, *client, data.templates, opt, data.tempo, data.rules);
    ctx.config["metadata"] = a.metadata;
    ctx.config["task"] = a.task;
    ctx.config["template"] = opt.template_name;
    ctx.config["annotator"] = a.annotator;
  }

  ctx.config["split"] = a.split;
  std::string primary;
  if (a.split == "none") {
    write_output(ctx, a.output, bench::records_to_jsonl(records));
    primary = a.output;
  } else {
    bench::SplitSpec spec;
    spec.seed = c.seed;
    if (a.split == "ratio") {
      spec.train_fraction = a.train_fraction;
      ctx.config["train_fraction"] = a.train_fraction;
    } else if (a.split == "topup") {
      spec.mode = bench::SplitSpec::Mode::seeded_topup;
      spec.target_test_size = a.test_size;
      std::istringstream in(io::read_text(a.pinned));
      for (std::string id; std::getline(in, id);) {
        if (!id.empty()) {
          spec.pinned_test_ids.push_back(id);
        }
      }
      ctx.config["pinned"] = a.pinned;
      ctx.config["test_size"] = a.test_size;
    } else {
      throw UsageError("unknown split mode: " + a.split);
    }
    const auto split = bench::split_dataset(records, spec);
    if (!a.output.empty()) {
      write_output(ctx, a.output, bench::records_to_jsonl(records));
    }
    write_output(ctx, a.train_output, bench::records_to_jsonl(with_suffix(split.train, "_train")));
    write_output(ctx, a.test_output, bench::records_to_jsonl(with_suffix(split.test, "_test")));
    primary = a.output.empty() ? a.test_output : a.output;
    out << "train " << split.train.size() << ", test " << split.test.size() << "\n";
  }
  out << "wrote " << records.size() << " records\n";
  finish(ctx, c, primary);
  return 0;
}

// preprocess

int cmd_preprocess(Context& ctx, const Common& c, const std::string& audio_path, const std::string& mel_out,
                   const std::string& tokens_out, std::ostream& out) {
  require_file(audio_path, "--audio");
  const auto raw = audio::read_wav(audio_path);
  const auto clip = audio::standardize_clip(raw);
  const auto mel = audio::mel_spectrogram(clip);
  const auto tokens = audio::patchify(audio::normalize_mel(mel));
  const auto pooled = audio::mean_pool_tokens(tokens, {c.pool_factor});
  if (!mel_out.empty()) {
    write_output(ctx, mel_out, audio::encode_mel(mel));
  }
  if (!tokens_out.empty()) {
    write_output(ctx, tokens_out, audio::encode_tokens(pooled));
  }
  ctx.config["audio"] = audio_path;
  ctx.config["pool_factor"] = c.pool_factor;
  ojson shapes{{"input_sample_rate", raw.sample_rate},
               {"input_seconds", raw.duration()},
               {"mel", {mel.n_frames, mel.n_bins}},
               {"tokens", {tokens.n_tokens, tokens.dim}},
               {"pooled_tokens", {pooled.n_tokens, pooled.dim}},
               {"pool_factor", c.pool_factor}};
  out << shapes.dump() << "\n";
  finish(ctx, c, !tokens_out.empty() ? tokens_out : mel_out);
  return 0;
}

// eval-text

std::vector<std::pair<std::string, std::string>> read_predictions(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& line : io::read_jsonl(path)) {
    const auto& v = line.value;
    if (!v.is_object() || !v.contains("id") || !v.contains("prediction") || !v["prediction"].is_string()) {
      throw Error(path + ":" + std::to_string(line.line_number) + ": expected {\"id\", \"prediction\"}");
    }
    rows.emplace_back(id_string(v["id"]), v["prediction"].get<std::string>());
  }
  return rows;
}

std::map<std::string, std::string> read_references(const std::string& path) {
  std::map<std::string, std::string> refs;
  std::size_t index = 0;
  for (const auto& line : io::read_jsonl(path)) {
    const auto& v = line.value;
    const auto where = path + ":" + std::to_string(line.line_number) + ": ";
    std::string id, text;
    if (v.is_object() && v.contains("reference")) {
      if (!v.contains("id") || !v["reference"].is_string()) {
        throw Error(where + "expected {\"id\", \"reference\"}");
      }
      id = id_string(v["id"]);
      text = v["reference"].get<std::string>();
    } else {
      try {
        text = bench::record_from_json(v).output;
      } catch (const std::exception& e) {
        throw Error(where + e.what());
      }
      id = std::to_string(index);
    }
    ++index;
    if (!refs.emplace(id, text).second) {
      throw Error(where + "duplicate id " + id);
    }
  }
  return refs;
}

int cmd_eval_text(Context& ctx, const Common& c, const std::string& pred, const std::string& ref,
                  const std::string& output, std::ostream& out) {
  require_file(pred, "--pred");
  require_file(ref, "--ref");
  const auto predictions = read_predictions(pred);
  auto refs = read_references(ref);
  std::vector<std::string> hyps, golds;
  for (const auto& [id, text] : predictions) {
    const auto it = refs.find(id);
    if (it == refs.end()) {
      throw Error("prediction id " + id + " has no reference");
    }
    hyps.push_back(text);
    golds.push_back(it->second);
    refs.erase(it);
  }
  if (!refs.empty()) {
    throw Error("reference id " + refs.begin()->first + " has no prediction");
  }
  if (hyps.empty()) {
    throw Error("no predictions to evaluate");
  }
  auto report = metrics::report_to_json(metrics::evaluate_corpus(hyps, golds));
  report["pool_factor"] = c.pool_factor;
  report["lora"] = lora_json(c);
  ctx.config["pred"] = pred;
  ctx.config["ref"] = ref;
  const auto text = report.dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_output(ctx, output, text);
  }
  finish(ctx, c, output);
  return 0;
}

// eval-mcq

int cmd_eval_mcq(Context& ctx, const Common& c, const std::string& items_path, const std::string& pred,
                 const std::string& output, std::ostream& out) {
  require_file(items_path, "--items");
  require_file(pred, "--pred");
  std::map<std::string, std::string> answers;
  for (const auto& [id, text] : read_predictions(pred)) {
    if (!answers.emplace(id, text).second) {
      throw Error(pred + ": duplicate id " + id);
    }
  }
  std::vector<metrics::McqItem> items;
  for (const auto& line : io::read_jsonl(items_path)) {
    const auto& v = line.value;
    const auto where = items_path + ":" + std::to_string(line.line_number) + ": ";
    metrics::McqItem item;
    std::string id;
    try {
      id = id_string(v.at("id"));
      item.question = v.at("question").get<std::string>();
      const auto opts = v.at("options").get<std::vector<std::string>>();
      if (opts.size() != 4) {
        throw Error("expected four options");
      }
      std::copy(opts.begin(), opts.end(), item.options.begin());
      const auto gold = v.at("answer").get<std::string>();
      const auto label = gold.size() == 1 ? metrics::parse_label(gold[0]) : std::nullopt;
      if (!label) {
        throw Error("answer must be one of A, B, C, D");
      }
      item.gold = *label;
    } catch (const std::exception& e) {
      throw Error(where + e.what());
    }
    const auto it = answers.find(id);
    if (it == answers.end()) {
      throw Error(where + "item " + id + " has no prediction");
    }
    item.model_answer = it->second;
    answers.erase(it);
    items.push_back(std::move(item));
  }
  if (!answers.empty()) {
    throw Error("prediction id " + answers.begin()->first + " matches no item");
  }
  if (items.empty()) {
    throw Error("no items to evaluate");
  }
  const auto outcome = metrics::mcq_score(items);
  ojson report{{"accuracy", 100.0 * outcome.accuracy},
               {"ifr", 100.0 * outcome.ifr},
               {"n_items", items.size()},
               {"tokenizer_version", metrics::kTokenizerVersion},
               {"pool_factor", c.pool_factor},
               {"lora", lora_json(c)}};
  ctx.config["items"] = items_path;
  ctx.config["pred"] = pred;
  const auto text = report.dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_output(ctx, output, text);
  }
  finish(ctx, c, output);
  return 0;
}

// eval-tools

int cmd_eval_tools(Context& ctx, const Common& c, const std::string& gold_path, const std::string& pred,
                   const std::string& output, std::ostream& out) {
  require_file(gold_path, "--gold");
  require_file(pred, "--pred");
  const auto gold = bench::read_records(gold_path);
  std::map<std::string, std::string> answers;
  for (const auto& [id, text] : read_predictions(pred)) {
    if (!answers.emplace(id, text).second) {
      throw Error(pred + ": duplicate id " + id);
    }
  }
  if (answers.size() != gold.size()) {
    throw Error("expected " + std::to_string(gold.size()) + " predictions, got " + std::to_string(answers.size()));
  }
  std::vector<toolcall::Score> scores;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto it = answers.find(std::to_string(i));
    if (it == answers.end()) {
      throw Error("gold record " + std::to_string(i) + " has no prediction");
    }
    try {
      scores.push_back(toolcall::score_tool_use(it->second, gold[i].output));
    } catch (const std::exception& e) {
      throw Error(gold_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  auto report = toolcall::summary_to_json(toolcall::summarize(scores));
  report["tokenizer_version"] = metrics::kTokenizerVersion;
  report["pool_factor"] = c.pool_factor;
  report["lora"] = lora_json(c);
  ctx.config["gold"] = gold_path;
  ctx.config["pred"] = pred;
  const auto text = report.dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_output(ctx, output, text);
  }
  finish(ctx, c, output);
  return 0;
}

// run-tool

std::vector<double> parse_args(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    v.push_back(toolcall::Number::parse(CLI::detail::trim_copy(item)).value());
  }
  return v;
}

int cmd_run_tool(Context& ctx, const Common& c, const std::string& tool, const std::string& args,
                 const std::string& text, const std::string& audio_path, std::ostream& out) {
  if (tool.empty() == text.empty()) {
    throw UsageError("run-tool needs exactly one of --tool or --text");
  }
  require_file(audio_path, "--audio");
  auto clip = audio::read_wav(audio_path);
  if (clip.sample_rate != audio::kSampleRate) {
    clip.samples = audio::resample(clip.samples, clip.sample_rate, audio::kSampleRate);
    clip.sample_rate = audio::kSampleRate;
  }
  const auto registry = toolcall::default_registry();
  if (!text.empty()) {
    out << toolcall::execute_and_render(text, registry, clip) << "\n";
  } else {
    const auto* spec = registry.find(tool);
    if (!spec) {
      throw Error("unknown tool: " + tool);
    }
    const auto values = parse_args(args);
    if (values.size() != spec->arity) {
      throw Error(tool + " takes " + std::to_string(spec->arity) + " arguments, got " +
                  std::to_string(values.size()));
    }
    out << spec->run(clip, values) << "\n";
  }
  ctx.config["tool"] = tool;
  ctx.config["audio"] = audio_path;
  finish(ctx, c, "");
  return 0;
}

// report

int cmd_report(Context& ctx, const Common& c, const std::vector<std::string>& inputs, const std::string& output,
               std::ostream& out) {
  if (inputs.empty()) {
    throw UsageError("report needs --inputs");
  }
  ojson merged;
  merged["versions"] = versions();
  merged["reports"] = ojson::object();
  for (const auto& path : inputs) {
    require_file(path, "report input");
    const auto key = fs::path(path).stem().string();
    if (merged["reports"].contains(key)) {
      throw Error("two report inputs share the name " + key);
    }
    merged["reports"][key] = ojson::parse(io::read_text(path));
  }
  ctx.config["inputs"] = inputs;
  const auto text = merged.dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_output(ctx, output, text);
  }
  finish(ctx, c, output);
  return 0;
}

// --config file.json: appended as flags, so its values win over the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        throw UsageError("--config needs a file");
      }
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (path.empty()) {
    return kept;
  }
  require_file(path, "--config");
  const auto cfg = io::read_json(path);
  if (!cfg.is_object()) {
    throw Error(path + ": config must be a JSON object");
  }
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    const auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_boolean()) {
      if (value.get<bool>()) {
        kept.push_back(flag);
      }
    } else if (value.is_array()) {
      kept.push_back(flag);
      for (const auto& v : value) {
        kept.push_back(scalar(v));
      }
    } else {
      kept.push_back(flag);
      kept.push_back(scalar(value));
    }
  }
  return kept;
}

} // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"omk: music understanding toolkit", "omk"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  Context ctx;
  ctx.argv = raw_args;

  BuildArgs build;
  auto* sub_build = app.add_subcommand("build-bench", "Build benchmark records from clip metadata");
  add_common(*sub_build, common);
  sub_build->add_option("--metadata", build.metadata, "Clip metadata JSONL");
  sub_build->add_option("--output", build.output, "Output records JSONL");
  sub_build->add_option("--task", build.task, "Task label")->capture_default_str();
  sub_build->add_option("--template", build.template_name, "Prompt template name (default: task name)");
  sub_build->add_option("--annotator", build.annotator, "mock or remote")->capture_default_str();
  sub_build->add_option("--endpoint", build.endpoint, "Remote annotator URL (http://host:port/path)");
  sub_build->add_option("--max-in-flight", build.max_in_flight, "Concurrent annotation requests")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  build.data_dir = OMK_DEFAULT_DATA_DIR;
  sub_build->add_option("--data-dir", build.data_dir, "Directory of tempo/tag/prompt rule files")
      ->capture_default_str();
  sub_build->add_option("--split", build.split, "none, ratio or topup")->capture_default_str();
  sub_build->add_option("--train-fraction", build.train_fraction, "Train share for ratio splits")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sub_build->add_option("--pinned", build.pinned, "Pinned test ids, one per line");
  sub_build->add_option("--test-size", build.test_size, "Target test size for topup splits");
  sub_build->add_option("--train-output", build.train_output, "Train split JSONL");
  sub_build->add_option("--test-output", build.test_output, "Test split JSONL");
  sub_build->add_option("--tool-use", build.tool_use, "Generate N tool-use records instead of annotating");
  sub_build->add_option("--tools", build.tools, "Tool names for --tool-use")->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);

  std::string pre_audio, pre_mel, pre_tokens;
  auto* sub_pre = app.add_subcommand("preprocess", "Mel-spectrogram and pooled music tokens for one clip");
  add_common(*sub_pre, common);
  sub_pre->add_option("--audio", pre_audio, "Input WAV");
  sub_pre->add_option("--mel", pre_mel, "Write the (3072, 128) log-mel here");
  sub_pre->add_option("--tokens", pre_tokens, "Write the pooled tokens here");

  ToyTrainOptions toy;
  auto* sub_toy = app.add_subcommand("train-toy", "Two-stage training of the tiny model on synthetic clips");
  add_common(*sub_toy, common);
  sub_toy->add_option("--output-dir", toy.output_dir, "Checkpoint, logs and report directory");
  sub_toy->add_option("--examples", toy.n_examples, "Toy examples")->capture_default_str()->check(
      CLI::Range(4, 64));
  sub_toy->add_option("--pretrain-steps", toy.pretrain_steps, "Text-only base pretraining steps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub_toy->add_option("--pretrain-lr", toy.pretrain_lr, "Pretraining learning rate")->capture_default_str();
  sub_toy->add_option("--stage1-steps", toy.stage1_steps, "Stage 1 steps")->capture_default_str()->check(
      CLI::PositiveNumber);
  sub_toy->add_option("--stage1-lr", toy.stage1_lr, "Stage 1 learning rate")->capture_default_str();
  sub_toy->add_option("--stage2-steps", toy.stage2_steps, "Stage 2 steps (0: default epochs)")
      ->capture_default_str();
  sub_toy->add_option("--stage2-lr", toy.stage2_lr, "Stage 2 learning rate")->capture_default_str();
  bool skip_stage2 = false;
  sub_toy->add_flag("--skip-stage2", skip_stage2, "Stop after stage 1");

  std::string ev_pred, ev_ref, ev_items, ev_gold, ev_output;
  auto* sub_text = app.add_subcommand("eval-text", "BLEU/ROUGE/METEOR over predictions and references");
  add_common(*sub_text, common);
  sub_text->add_option("--pred", ev_pred, "Predictions JSONL {id, prediction}");
  sub_text->add_option("--ref", ev_ref, "References JSONL {id, reference} or benchmark records");
  sub_text->add_option("--output", ev_output, "Report path (default: stdout)");

  auto* sub_mcq = app.add_subcommand("eval-mcq", "Multiple-choice accuracy and instruction-following rate");
  add_common(*sub_mcq, common);
  sub_mcq->add_option("--items", ev_items, "Items JSONL {id, question, options, answer}");
  sub_mcq->add_option("--pred", ev_pred, "Predictions JSONL {id, prediction}");
  sub_mcq->add_option("--output", ev_output, "Report path (default: stdout)");

  auto* sub_tools = app.add_subcommand("eval-tools", "Exact-match tool-call scoring");
  add_common(*sub_tools, common);
  sub_tools->add_option("--gold", ev_gold, "Gold benchmark records JSONL");
  sub_tools->add_option("--pred", ev_pred, "Predictions JSONL {id, prediction}; id is the gold line index");
  sub_tools->add_option("--output", ev_output, "Report path (default: stdout)");

  std::string rt_tool, rt_args, rt_text, rt_audio;
  auto* sub_tool = app.add_subcommand("run-tool", "Run one MIR tool, or every call in a text, on a clip");
  add_common(*sub_tool, common);
  sub_tool->add_option("--tool", rt_tool, "Tool name");
  sub_tool->add_option("--args", rt_args, "Comma-separated arguments");
  sub_tool->add_option("--text", rt_text, "Text whose calls are replaced by results");
  sub_tool->add_option("--audio", rt_audio, "Input WAV");

  std::vector<std::string> rp_inputs;
  auto* sub_report = app.add_subcommand("report", "Merge report JSON files");
  add_common(*sub_report, common);
  sub_report->add_option("--inputs", rp_inputs, "Report files")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sub_report->add_option("--output", ev_output, "Merged report path (default: stdout)");

  if (raw_args.empty()) {
    err << app.help();
    return 2;
  }

  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);

    if (common.workers > 0) {
      omp_set_num_threads(common.workers);
    }
    ctx.config["seed"] = common.seed;
    ctx.config["pool_factor"] = common.pool_factor;
    ctx.config["lora"] = lora_json(common);
    ctx.config["workers"] = common.workers;

    if (sub_build->parsed()) {
      ctx.command = "build-bench";
      return cmd_build_bench(ctx, common, build, out);
    }
    if (sub_pre->parsed()) {
      ctx.command = "preprocess";
      return cmd_preprocess(ctx, common, pre_audio, pre_mel, pre_tokens, out);
    }
    if (sub_toy->parsed()) {
      ctx.command = "train-toy";
      toy.seed = common.seed;
      toy.pool_factor = common.pool_factor;
      toy.lora_rank = common.lora_rank;
      toy.lora_alpha = common.lora_alpha;
      toy.stage2 = !skip_stage2;
      ctx.config["examples"] = toy.n_examples;
      ctx.config["pretrain_steps"] = toy.pretrain_steps;
      ctx.config["stage1_steps"] = toy.stage1_steps;
      ctx.config["stage2_steps"] = toy.stage2_steps;
      const auto report = train_toy(toy, out);
      ctx.outputs.push_back((fs::path(toy.output_dir) / "report.json").string());
      ctx.outputs.push_back((fs::path(toy.output_dir) / "checkpoint").string());
      write_manifest(ctx, common, fs::path(toy.output_dir) / "manifest.json");
      return 0;
    }
    if (sub_text->parsed()) {
      ctx.command = "eval-text";
      return cmd_eval_text(ctx, common, ev_pred, ev_ref, ev_output, out);
    }
    if (sub_mcq->parsed()) {
      ctx.command = "eval-mcq";
      return cmd_eval_mcq(ctx, common, ev_items, ev_pred, ev_output, out);
    }
    if (sub_tools->parsed()) {
      ctx.command = "eval-tools";
      return cmd_eval_tools(ctx, common, ev_gold, ev_pred, ev_output, out);
    }
    if (sub_tool->parsed()) {
      ctx.command = "run-tool";
      return cmd_run_tool(ctx, common, rt_tool, rt_args, rt_text, rt_audio, out);
    }
    if (sub_report->parsed()) {
      ctx.command = "report";
      return cmd_report(ctx, common, rp_inputs, ev_output, out);
    }
    err << app.help();
    return 2;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "omk: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "omk: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "omk: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run(args, out, err);
}

} // namespace omk::cli
