#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "omk/bench.hpp"
#include "omk/error.hpp"
#include "omk/toolcall.hpp"

using namespace omk;
using namespace omk::bench;

namespace {

ClipMetadata example_clip() {
  return metadata_from_json(nlohmann::json::parse(R"({
    "dataset_name": "music4all", "audio_filename": "4MqXFtyr1XwxrShX.mp3",
    "tempo": 90, "valence": 0.5, "energy": 0.8, "danceability": 0.5,
    "genre": ["Rock", "pop", "electronic"], "mood": ["ambient"]})"));
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

std::vector<BenchRecord> numbered(std::size_t n) {
  std::vector<BenchRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_record("q", "a", "clip" + std::to_string(i) + ".mp3", Task::captioning, "ds"));
  }
  return out;
}

class FailOn final : public AnnotationClient {
public:
  explicit FailOn(std::string needle) : needle_(std::move(needle)) {}
  AnnotationOutcome annotate(std::string_view prompt) const override {
    if (prompt.find(needle_) != std::string_view::npos) {
      return AnnotationFailure{FailureKind::refusal, "no"};
    }
    return Annotation{"i", "o"};
  }

private:
  std::string needle_;
};

class Echo final : public AnnotationClient {
public:
  AnnotationOutcome annotate(std::string_view prompt) const override {
    std::this_thread::sleep_for(std::chrono::milliseconds(prompt.size() % 3));
    return Annotation{std::string(prompt), "o"};
  }
};

// Local provider stub on an ephemeral port.
struct Provider {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> flaky_calls{0};
  std::string last_auth;

  Provider() {
    const std::string good = nlohmann::json{{"text", R"({"instruction":"Describe it.","output":"A song."})"}}.dump();
    server.Post("/ok", [this, good](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      auto body = nlohmann::json::parse(req.body);
      res.set_content(body.contains("prompt") ? good : "{}", "application/json");
    });
    server.Post("/flaky", [this, good](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(good, "application/json");
    });
    server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    server.Post("/bad-request", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    server.Post("/refuse", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"refusal":"cannot help"})", "application/json");
    });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text":"not json"})", "application/json");
    });
    server.Post("/partial", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text":"{\"instruction\":\"x\"}"})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Provider() {
    server.stop();
    thread.join();
  }
  RemoteConfig config(const std::string& path) const {
    RemoteConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + path;
    c.timeout = std::chrono::milliseconds(2000);
    c.max_attempts = 3;
    c.backoff_base = std::chrono::milliseconds(1);
    return c;
  }
};

FailureKind failure_of(const AnnotationOutcome& o) {
  REQUIRE(std::holds_alternative<AnnotationFailure>(o));
  return std::get<AnnotationFailure>(o).kind;
}

} // namespace

TEST_CASE("level thresholds are inclusive at 0.3 and 0.7") {
  CHECK(level_to_term(0.7, Attribute::energy) == "high energy");
  CHECK(level_to_term(0.6999, Attribute::energy) == "medium energy");
  CHECK(level_to_term(0.3, Attribute::valence) == "medium valence");
  CHECK(level_to_term(0.2999, Attribute::valence) == "low valence");
  CHECK(level_to_term(1.0, Attribute::danceability) == "highly danceable");
  CHECK(level_to_term(0.5, Attribute::danceability) == "medium danceable");
  CHECK(level_to_term(0.0, Attribute::danceability) == "not danceable");
  CHECK_THROWS_AS(level_to_term(1.01, Attribute::energy), Error);
  CHECK_THROWS_AS(level_to_term(-0.01, Attribute::energy), Error);
}

TEST_CASE("tempo terms cover the positive axis") {
  CHECK(tempo_to_term(90) == "walking pace tempo");
  const auto& rows = TempoTermTable::defaults().rows();
  REQUIRE_FALSE(rows.empty());
  CHECK(rows.front().lower_bpm == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].lower_bpm == rows[i - 1].upper_bpm);
    CHECK(tempo_to_term(rows[i].lower_bpm) == rows[i].phrase + " tempo");
  }
  CHECK_NOTHROW(tempo_to_term(400));
  CHECK_THROWS_AS(tempo_to_term(0), Error);
  CHECK_THROWS_AS(TempoTermTable({{"a", "a", 0, 60}, {"b", "b", 70, 1e9}}), Error);
}

TEST_CASE("tag rules") {
  CHECK(canonicalize_tag("acousticguitar") == "acoustic guitar");
  CHECK(canonicalize_tag("Female vocalists") == "female vocal");
  CHECK(canonicalize_tag("synth") == "synthesizer");
  CHECK(canonicalize_tag("  Hip   Hop ") == canonicalize_tag("hip hop"));
  for (const char* t : {"acousticguitar", "Female vocalists", "synth", "electro", "piano", "drums"}) {
    const auto once = canonicalize_tag(t);
    CHECK(canonicalize_tag(once) == once);
  }
  CHECK_NOTHROW(TagRules({{"a", "b"}}, {{"b", "c"}}, {}));
  CHECK_THROWS_AS(TagRules({{"b", "c"}}, {}, {{"a", "b"}}), Error);
}

TEST_CASE("normalized json of the worked example") {
  const auto expected = nlohmann::json::parse(R"({
    "dataset_name": "music4all", "audio_filename": "4MqXFtyr1XwxrShX.mp3",
    "tempo": "walking pace tempo", "valence": "medium valence", "energy": "high energy",
    "danceability": "medium danceable", "genre": ["rock", "pop", "electronic"], "mood": ["ambient"]})");
  const auto got = nlohmann::json::parse(normalized_json(example_clip()).dump());
  CHECK(got == expected);
  const auto flat = normalize_metadata(example_clip());
  CHECK(flat.at("genre") == "rock, pop, electronic");
  CHECK_FALSE(flat.contains("instrument"));
}

TEST_CASE("metadata validation") {
  CHECK_THROWS_AS(metadata_from_json(nlohmann::json::parse(R"({"dataset_name":"d","audio_filename":"a",
                                                               "energy":1.5})")),
                  Error);
  CHECK_THROWS_AS(metadata_from_json(nlohmann::json::parse(R"({"dataset_name":"d","audio_filename":"a",
                                                               "tempo":-3})")),
                  Error);
  const auto m = metadata_from_json(nlohmann::json::parse(R"({"dataset_name":"d","audio_filename":"a",
                                                               "tempo_bpm":120,"instruments":["synth"]})"));
  CHECK(m.tempo_bpm == 120.0);
  CHECK(m.instruments == std::vector<std::string>{"synth"});
}

TEST_CASE("prompts drop clauses for absent attributes") {
  const auto& tmpl = find_template(default_prompt_templates(), "captioning");
  const auto full = render_prompt(tmpl, example_clip());
  CHECK(full.find("- tempo: walking pace tempo\n") != std::string::npos);
  CHECK(full.find("- genre: rock, pop, electronic\n") != std::string::npos);
  CHECK(full.find("music4all") != std::string::npos);
  CHECK(full.find("- instrument:") == std::string::npos);
  CHECK(full.find("{dataset}") == std::string::npos);
  CHECK(full.find("[[") == std::string::npos);

  CHECK(render_prompt({"t", "x [[a {tempo} ]]b"}, NormalizedMetadata{}) == "x b");
  CHECK_THROWS_AS(render_prompt({"t", "x {tempo}"}, NormalizedMetadata{}), Error);
  CHECK_THROWS_AS(render_prompt({"t", "x [[ {tempo}"}, NormalizedMetadata{}), Error);
  CHECK_THROWS_AS(render_prompt({"t", "x ]] y"}, NormalizedMetadata{}), Error);
  CHECK_THROWS_AS(render_prompt({"t", "[[ [[ ]] ]]"}, NormalizedMetadata{}), Error);
  CHECK_THROWS_AS(render_prompt({"t", "{Bad}"}, NormalizedMetadata{{"Bad", "x"}}), Error);
  CHECK_THROWS_AS(find_template(default_prompt_templates(), "nope"), Error);
}

TEST_CASE("mock annotator mentions every attribute once") {
  const MockAnnotationClient mock;
  const auto prompt = render_prompt(find_template(default_prompt_templates(), "captioning"), example_clip());
  const auto out = mock.annotate(prompt);
  REQUIRE(std::holds_alternative<Annotation>(out));
  const auto& a = std::get<Annotation>(out);
  for (const char* v : {"walking pace tempo", "high energy", "medium valence", "medium danceable",
                        "rock, pop, electronic", "ambient"}) {
    CAPTURE(v);
    CHECK(count_of(a.output, v) == 1);
  }
  const auto& ins = MockTemplates::defaults().instructions;
  CHECK(std::find(ins.begin(), ins.end(), a.instruction) != ins.end());
  CHECK(std::get<Annotation>(mock.annotate(prompt)).output == a.output);
  CHECK(failure_of(mock.annotate("  ")) == FailureKind::invalid_request);
  CHECK(failure_of(mock.annotate("no metadata here")) == FailureKind::invalid_request);
}

TEST_CASE("records follow the five-key schema") {
  const auto r = make_record("Explain.", "A song.", "x.mp3", "captioning", "music4all_test");
  const auto j = record_to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) {
    keys.push_back(k);
  }
  CHECK(keys == std::vector<std::string>{"instruction", "output", "local_audio_path", "task", "dataset"});
  CHECK(record_from_json(nlohmann::json::parse(j.dump())) == r);

  auto extra = nlohmann::json::parse(j.dump());
  extra["id"] = "1";
  CHECK_THROWS_AS(record_from_json(extra), Error);
  auto missing = nlohmann::json::parse(j.dump());
  missing.erase("dataset");
  CHECK_THROWS_AS(record_from_json(missing), Error);
  auto empty = nlohmann::json::parse(j.dump());
  empty["output"] = "";
  CHECK_THROWS_AS(record_from_json(empty), Error);
  auto task = nlohmann::json::parse(j.dump());
  task["task"] = "summarizing";
  CHECK_THROWS_AS(record_from_json(task), Error);
  for (const char* t : {"captioning", "reasoning", "lyrics", "tool_use", "multiple_choice"}) {
    CHECK(to_string(*parse_task(t)) == t);
  }
}

TEST_CASE("reading records reports the failing line") {
  const auto dir = std::filesystem::temp_directory_path() / "omk_test_bench";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.jsonl";
  {
    std::ofstream out(path);
    out << records_to_jsonl(numbered(2)) << R"({"instruction":"q"})" << "\n";
  }
  try {
    read_records(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << records_to_jsonl(numbered(3));
  }
  CHECK(read_records(path) == numbered(3));
  std::filesystem::remove_all(dir);
}

TEST_CASE("ratio split of 100 records") {
  const auto recs = numbered(100);
  SplitSpec spec;
  spec.seed = 5;
  const auto s = split_dataset(recs, spec);
  CHECK(s.train.size() == 80);
  CHECK(s.test.size() == 20);
  std::set<std::string> seen;
  for (const auto* half : {&s.train, &s.test}) {
    for (const auto& r : *half) {
      CHECK(seen.insert(r.local_audio_path).second);
    }
  }
  CHECK(seen.size() == 100);
  const auto again = split_dataset(recs, spec);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  spec.seed = 6;
  CHECK_FALSE(split_dataset(recs, spec).test == s.test);
  spec.train_fraction = 1.0;
  CHECK_THROWS_AS(split_dataset(recs, spec), Error);
  CHECK_THROWS_AS(split_dataset({}, SplitSpec{}), Error);
}

TEST_CASE("seeded top-up keeps pinned ids and reaches the target") {
  std::vector<std::string> ids;
  for (int i = 0; i < 500; ++i) {
    ids.push_back("id" + std::to_string(i));
  }
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::seeded_topup;
  spec.seed = 11;
  spec.target_test_size = 50;
  for (int i : {3, 17, 42, 99, 150, 201, 333, 499}) {
    spec.pinned_test_ids.push_back("id" + std::to_string(i));
  }
  const auto [train, test] = split_indices(ids, spec);
  CHECK(test.size() == 50);
  CHECK(train.size() == 450);
  const std::set<std::size_t> t(test.begin(), test.end());
  for (std::size_t i : {3, 17, 42, 99, 150, 201, 333, 499}) {
    CHECK(t.contains(i));
  }
  CHECK(split_indices(ids, spec).second == test);

  auto bad = spec;
  bad.pinned_test_ids.push_back("missing");
  CHECK_THROWS_AS(split_indices(ids, bad), Error);
  bad = spec;
  bad.target_test_size = 5;
  CHECK_THROWS_AS(split_indices(ids, bad), Error);
  bad = spec;
  bad.target_test_size = 501;
  CHECK_THROWS_AS(split_indices(ids, bad), Error);
}

TEST_CASE("tool-use records carry exactly one known call") {
  const auto sigs = toolcall::default_tool_signatures();
  std::vector<std::string> names;
  for (const auto& [name, arity] : sigs) {
    names.push_back(name);
  }
  const auto recs = build_tool_use_dataset(200, 3, names);
  REQUIRE(recs.size() == 200);
  std::set<std::string> used;
  for (const auto& r : recs) {
    CHECK(r.task == Task::tool_use);
    const auto parsed = toolcall::parse_calls(r.output);
    REQUIRE(parsed.calls.size() == 1);
    CHECK(parsed.diagnostics.empty());
    const auto& c = parsed.calls[0].call;
    used.insert(c.name);
    const auto sig = std::find_if(sigs.begin(), sigs.end(), [&](const auto& p) { return p.first == c.name; });
    REQUIRE(sig != sigs.end());
    CHECK(c.args.size() == sig->second);
    CHECK(r.output.find(toolcall::render(c)) != std::string::npos);
  }
  CHECK(used.size() == names.size());
  CHECK(build_tool_use_dataset(200, 3, names) == recs);
  CHECK_THROWS_AS(build_tool_use_dataset(5, 3, {"NoSuchTool"}), Error);
}

TEST_CASE("build records preserves order and fails as a whole") {
  std::vector<ClipMetadata> clips;
  for (int i = 0; i < 6; ++i) {
    auto c = example_clip();
    c.audio_filename = "c" + std::to_string(i) + ".mp3";
    c.tempo_bpm = 60.0 + 20.0 * i;
    clips.push_back(c);
  }
  const auto recs = build_records(clips, MockAnnotationClient{}, default_prompt_templates(), {});
  REQUIRE(recs.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(recs[i].local_audio_path == clips[i].audio_filename);
    CHECK(recs[i].dataset == "music4all");
  }
  clips[3].genres = {"zydeco"};
  CHECK_THROWS_AS(build_records(clips, FailOn("zydeco"), default_prompt_templates(), {}), Error);
}

TEST_CASE("annotate_all keeps input order") {
  std::vector<std::string> prompts;
  for (int i = 0; i < 40; ++i) {
    prompts.push_back("p" + std::to_string(i) + std::string(static_cast<std::size_t>(i % 5), '.'));
  }
  for (std::size_t in_flight : {1u, 3u, 8u}) {
    const auto out = annotate_all(Echo{}, prompts, in_flight);
    REQUIRE(out.size() == prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      CHECK(std::get<Annotation>(out[i]).instruction == prompts[i]);
    }
  }
}

TEST_CASE("shipped data files equal the built-in defaults") {
  const std::filesystem::path dir = OMK_TEST_DATA_DIR;
  CHECK(TempoTermTable::from_json(read_json(dir / "tempo_terms.json")).to_json() ==
        TempoTermTable::defaults().to_json());
  CHECK(TagRules::from_json(read_json(dir / "tag_rules.json")).to_json() == TagRules::defaults().to_json());
  CHECK(MockTemplates::from_json(read_json(dir / "mock_templates.json")).to_json() ==
        MockTemplates::defaults().to_json());
  const auto tmpls = prompt_templates_from_json(read_json(dir / "prompt_templates.json"));
  REQUIRE(tmpls.size() == default_prompt_templates().size());
  for (std::size_t i = 0; i < tmpls.size(); ++i) {
    CHECK(tmpls[i].name == default_prompt_templates()[i].name);
    CHECK(tmpls[i].text == default_prompt_templates()[i].text);
  }
}

TEST_CASE("remote client against a local provider") {
  Provider p;
  const std::string prompt = "- tempo: fast tempo";

  auto cfg = p.config("/ok");
  cfg.token = "test-token";
  const auto ok = RemoteAnnotationClient(cfg).annotate(prompt);
  REQUIRE(std::holds_alternative<Annotation>(ok));
  CHECK(std::get<Annotation>(ok).instruction == "Describe it.");
  CHECK(p.last_auth == "Bearer test-token");
  RemoteAnnotationClient(p.config("/ok")).annotate(prompt);
  CHECK(p.last_auth.empty());

  const auto retried = RemoteAnnotationClient(p.config("/flaky")).annotate(prompt);
  CHECK(std::holds_alternative<Annotation>(retried));
  CHECK(p.flaky_calls == 3);

  CHECK(failure_of(RemoteAnnotationClient(p.config("/down")).annotate(prompt)) == FailureKind::transport);
  CHECK(failure_of(RemoteAnnotationClient(p.config("/bad-request")).annotate(prompt)) == FailureKind::refusal);
  CHECK(failure_of(RemoteAnnotationClient(p.config("/refuse")).annotate(prompt)) == FailureKind::refusal);
  CHECK(failure_of(RemoteAnnotationClient(p.config("/garbage")).annotate(prompt)) == FailureKind::malformed);
  CHECK(failure_of(RemoteAnnotationClient(p.config("/partial")).annotate(prompt)) == FailureKind::malformed);
  CHECK(failure_of(RemoteAnnotationClient(p.config("/ok")).annotate("")) == FailureKind::invalid_request);

  CHECK_THROWS_AS(RemoteAnnotationClient(RemoteConfig{"https://example.org/x", "", {}, 1, {}}), Error);
  CHECK_THROWS_AS(RemoteAnnotationClient(RemoteConfig{"example.org", "", {}, 1, {}}), Error);
}

TEST_CASE("unreachable provider is a transport failure") {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  RemoteConfig c;
  c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/x";
  c.max_attempts = 2;
  c.backoff_base = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(500);
  const auto k = failure_of(RemoteAnnotationClient(c).annotate("- tempo: x"));
  CHECK((k == FailureKind::transport || k == FailureKind::timeout));
}
