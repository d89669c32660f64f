#pragma once

// Benchmark construction: metadata normalization, prompt rendering,
// annotation clients, record schema, splits and the tool-use generator.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace omk::bench {

// Metadata

struct ClipMetadata {
  std::string dataset_name;
  std::string audio_filename;
  std::optional<double> tempo_bpm;
  std::optional<double> energy;
  std::optional<double> valence;
  std::optional<double> danceability;
  std::vector<std::string> genres;
  std::vector<std::string> moods;
  std::vector<std::string> instruments;
  std::vector<std::string> others;
};

/// Accepts "tempo"/"tempo_bpm" and singular or plural tag keys. Validates
/// score ranges and tempo positivity.
ClipMetadata metadata_from_json(const nlohmann::json& j);

struct TempoTerm {
  std::string term;   // Italian marking, e.g. "andante"
  std::string phrase; // natural-language form, e.g. "walking pace"
  double lower_bpm;   // inclusive; 0 for the first row
  double upper_bpm;   // exclusive; +inf for the last row
};

class TempoTermTable {
public:
  explicit TempoTermTable(std::vector<TempoTerm> rows); // validates contiguity
  static const TempoTermTable& defaults();
  static TempoTermTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const TempoTerm& lookup(double bpm) const;
  const std::vector<TempoTerm>& rows() const { return rows_; }

private:
  std::vector<TempoTerm> rows_;
};

/// "<phrase> tempo" of the interval containing bpm.
std::string tempo_to_term(double bpm, const TempoTermTable& table = TempoTermTable::defaults());

enum class Attribute { energy, valence, danceability };

/// s >= 0.7 high, 0.3 <= s < 0.7 medium, otherwise low. Danceability reads
/// "highly danceable" / "medium danceable" / "not danceable".
std::string level_to_term(double score, Attribute attribute);

class TagRules {
public:
  TagRules() = default;
  /// Rejects rule sets whose outputs would be rewritten again.
  TagRules(std::map<std::string, std::string> decompound, std::map<std::string, std::string> unify,
           std::map<std::string, std::string> expand);
  static const TagRules& defaults();
  static TagRules from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Lowercase, trim, collapse whitespace, then de-compound, unify and expand
  /// (whole-tag rewrites, in that order). Idempotent.
  std::string canonicalize(std::string_view tag) const;

private:
  std::map<std::string, std::string> decompound_, unify_, expand_;
};

std::string canonicalize_tag(std::string_view tag, const TagRules& rules = TagRules::defaults());

/// Attribute name -> rendered value ("high energy", "rock, pop, electronic").
/// Absent attributes are missing from the map.
using NormalizedMetadata = std::map<std::string, std::string>;

NormalizedMetadata normalize_metadata(const ClipMetadata& meta,
                                      const TempoTermTable& tempo = TempoTermTable::defaults(),
                                      const TagRules& rules = TagRules::defaults());

/// The normalized JSON form (tempo/energy/... as phrases, tag lists as arrays).
nlohmann::ordered_json normalized_json(const ClipMetadata& meta,
                                       const TempoTermTable& tempo = TempoTermTable::defaults(),
                                       const TagRules& rules = TagRules::defaults());

// Prompts

/// Template text with {placeholders}. A clause written as [[ ... ]] is dropped
/// when any placeholder inside it is absent; a placeholder outside a clause is
/// mandatory.
struct PromptTemplate {
  std::string name;
  std::string text;
};

const std::vector<PromptTemplate>& default_prompt_templates();
std::vector<PromptTemplate> prompt_templates_from_json(const nlohmann::json& j);
const PromptTemplate& find_template(const std::vector<PromptTemplate>& templates, std::string_view name);

std::string render_prompt(const PromptTemplate& tmpl, const NormalizedMetadata& values);
std::string render_prompt(const PromptTemplate& tmpl, const ClipMetadata& meta);

// Annotation

struct Annotation {
  std::string instruction;
  std::string output;
};

enum class FailureKind { invalid_request, transport, timeout, refusal, malformed };
std::string_view to_string(FailureKind k);

struct AnnotationFailure {
  FailureKind kind = FailureKind::transport;
  std::string message;
};

using AnnotationOutcome = std::variant<Annotation, AnnotationFailure>;

class AnnotationClient {
public:
  virtual ~AnnotationClient() = default;
  /// Total: returns an annotation or a typed failure, never throws.
  virtual AnnotationOutcome annotate(std::string_view prompt) const = 0;
};

struct MockTemplates {
  std::vector<std::string> instructions;
  std::vector<std::string> order; // attribute keys in output order
  std::map<std::string, std::string> sentences; // attribute -> sentence with {value}

  static const MockTemplates& defaults();
  static MockTemplates from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Offline stand-in: reads the "- key: value" metadata lines embedded in the
/// prompt and fills one sentence per attribute. Deterministic and reentrant.
class MockAnnotationClient final : public AnnotationClient {
public:
  explicit MockAnnotationClient(MockTemplates templates = MockTemplates::defaults());
  AnnotationOutcome annotate(std::string_view prompt) const override;

private:
  MockTemplates templates_;
};

struct RemoteConfig {
  std::string endpoint; // http://host:port/path
  std::string token;    // bearer token; empty for none
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 4;
  std::chrono::milliseconds backoff_base{500};
};

/// POSTs {"prompt": ...} and expects {"text": ...}, where text is a JSON
/// object with "instruction" and "output". Retries transport errors, 429 and
/// 5xx with exponential backoff.
class RemoteAnnotationClient final : public AnnotationClient {
public:
  explicit RemoteAnnotationClient(RemoteConfig config);
  AnnotationOutcome annotate(std::string_view prompt) const override;

private:
  RemoteConfig config_;
  std::string base_;
  std::string path_;
};

/// Reads the bearer token from OMK_ANNOTATION_TOKEN.
std::string annotation_token_from_env();

/// Annotates every prompt with at most `max_in_flight` concurrent requests;
/// results keep the input order.
std::vector<AnnotationOutcome> annotate_all(const AnnotationClient& client, const std::vector<std::string>& prompts,
                                            std::size_t max_in_flight = 4);

// Records

enum class Task { captioning, reasoning, lyrics, tool_use, multiple_choice };
std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view s);

struct BenchRecord {
  std::string instruction;
  std::string output;
  std::string local_audio_path;
  Task task = Task::captioning;
  std::string dataset;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

/// Validates non-empty fields.
BenchRecord make_record(std::string instruction, std::string output, std::string audio_path, Task task,
                        std::string dataset);
BenchRecord make_record(std::string instruction, std::string output, std::string audio_path,
                        std::string_view task, std::string dataset);

/// Exactly the five keys, in schema order.
nlohmann::ordered_json record_to_json(const BenchRecord& r);
/// Strict: exactly the five keys, all non-empty strings, valid task.
BenchRecord record_from_json(const nlohmann::json& j);

std::string records_to_jsonl(const std::vector<BenchRecord>& records);
/// Schema violations raise omk::Error with the 1-based line number.
std::vector<BenchRecord> read_records(const std::filesystem::path& path);

// Splits

struct SplitSpec {
  enum class Mode { ratio, seeded_topup };
  Mode mode = Mode::ratio;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::vector<std::string> pinned_test_ids;
  std::size_t target_test_size = 0;
};

struct Split {
  std::vector<BenchRecord> train;
  std::vector<BenchRecord> test;
};

/// Records are identified by local_audio_path. Both halves keep input order.
Split split_dataset(const std::vector<BenchRecord>& records, const SplitSpec& spec);

/// Index form of the split (train indices, test indices), ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const std::vector<std::string>& ids,
                                                                            const SplitSpec& spec);

// Tool-use dataset

/// n question/answer records, each answer embedding exactly one canonical
/// call to one of `registry_names`. Deterministic in (n, seed).
std::vector<BenchRecord> build_tool_use_dataset(std::size_t n, std::uint64_t seed,
                                                const std::vector<std::string>& registry_names);

// Pipeline

struct BuildOptions {
  Task task = Task::captioning;
  std::string template_name = "captioning";
  std::size_t max_in_flight = 4;
};

/// normalize -> render prompt -> annotate -> record, for every clip. Any
/// annotation failure throws omk::Error and yields no records.
std::vector<BenchRecord> build_records(const std::vector<ClipMetadata>& clips, const AnnotationClient& client,
                                       const std::vector<PromptTemplate>& templates, const BuildOptions& options,
                                       const TempoTermTable& tempo = TempoTermTable::defaults(),
                                       const TagRules& rules = TagRules::defaults());

} // namespace omk::bench
