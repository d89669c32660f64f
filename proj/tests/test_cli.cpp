#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "omk/audio.hpp"
#include "omk/cli.hpp"
#include "omk/io.hpp"
#include "omk/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result omk_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = omk::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("omk_test_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& contents) const {
    const auto p = path / name;
    std::ofstream(p) << contents;
    return p.string();
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string click_wav(const TempDir& dir, double bpm) {
  omk::synth::ClickTrackSpec spec;
  spec.bpm = bpm;
  const auto path = dir / "click.wav";
  omk::audio::write_wav(path, omk::synth::click_track(spec));
  return path;
}

std::string metadata_jsonl(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    json j{{"dataset_name", "toyset"},
           {"audio_filename", "clip" + std::to_string(i) + ".mp3"},
           {"tempo", 60 + static_cast<int>(i % 7) * 15},
           {"energy", static_cast<double>(i % 10) / 10.0},
           {"genre", {"rock", "synth pop"}}};
    s += j.dump() + "\n";
  }
  return s;
}

} // namespace

TEST_CASE("exit codes") {
  CHECK(omk_run({}).code == 2);
  CHECK(omk_run({"--help"}).code == 0);
  const auto v = omk_run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(omk::cli::kVersion) != std::string::npos);
  CHECK(omk_run({"frobnicate"}).code == 2);
  CHECK(omk_run({"eval-text", "--bogus"}).code == 2);
  CHECK(omk_run({"eval-text"}).code == 2);
  const auto missing = omk_run({"eval-text", "--pred", "/nonexistent/p.jsonl", "--ref", "/nonexistent/r.jsonl"});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
  TempDir dir("codes");
  const auto wav = click_wav(dir, 120);
  CHECK(omk_run({"preprocess", "--audio", wav, "--pool-factor", "7"}).code == 2);
  CHECK(omk_run({"run-tool", "--tool", "NoSuchTool", "--audio", wav}).code == 1);
}

TEST_CASE("identical predictions score 100 on surface metrics") {
  TempDir dir("identity");
  std::string pred, ref;
  const std::vector<std::string> texts{"A calm piano piece in C major.", "Fast drums and loud electric guitars.",
                                       "The singer has a warm voice and the band plays slowly."};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    pred += json{{"id", i}, {"prediction", texts[i]}}.dump() + "\n";
    ref += json{{"id", i}, {"reference", texts[i]}}.dump() + "\n";
  }
  const auto r = omk_run({"eval-text", "--pred", dir.file("p.jsonl", pred), "--ref", dir.file("r.jsonl", ref),
                          "--output", dir / "report.json"});
  REQUIRE(r.code == 0);
  const auto rep = omk::io::read_json(dir / "report.json");
  for (const char* k : {"bleu1", "bleu", "rouge1", "rougeL"}) {
    CAPTURE(k);
    CHECK(rep[k].get<double>() == doctest::Approx(100.0));
  }
  CHECK(rep["pool_factor"] == 8);
  CHECK(rep["lora"]["rank"] == 16);
  CHECK(rep["lora"]["alpha"] == 128.0);
  CHECK(fs::exists(dir / "report.json.manifest.json"));
}

TEST_CASE("failed evaluation leaves no partial output") {
  TempDir dir("partial");
  const auto pred = dir.file("p.jsonl", R"({"id": 0, "prediction": "a"})"
                                        "\n"
                                        R"({"id": 5, "prediction": "b"})"
                                        "\n");
  const auto ref = dir.file("r.jsonl", R"({"id": 0, "reference": "a"})"
                                       "\n"
                                       R"({"id": 1, "reference": "b"})"
                                       "\n");
  const auto r = omk_run({"eval-text", "--pred", pred, "--ref", ref, "--output", dir / "report.json"});
  CHECK(r.code == 1);
  CHECK_FALSE(fs::exists(dir / "report.json"));
  CHECK_FALSE(fs::exists(dir / "report.json.manifest.json"));

  const auto meta = dir.file("meta.jsonl", metadata_jsonl(3) + "{\"dataset_name\": \"x\"}\n");
  const auto b = omk_run({"build-bench", "--metadata", meta, "--output", dir / "bench.jsonl"});
  CHECK(b.code == 1);
  CHECK(b.err.find(":4:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "bench.jsonl"));
}

TEST_CASE("run-tool estimates the tempo of a click track") {
  TempDir dir("tool");
  const auto wav = click_wav(dir, 120);
  const auto r = omk_run({"run-tool", "--tool", "EstimateTempo", "--audio", wav});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("120.0") != std::string::npos);
  const auto t = omk_run({"run-tool", "--text", "Tempo: [EstimateTempo()] bpm", "--audio", wav,
                          "--manifest-dir", dir / "m"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("Tempo: 120.0 bpm") != std::string::npos);
  CHECK(fs::exists(dir / "m/run-tool.manifest.json"));
}

TEST_CASE("config file values override flags") {
  TempDir dir("config");
  const auto wav = click_wav(dir, 100);
  const auto cfg = dir.file("cfg.json", R"({"pool_factor": 16})");
  const auto r = omk_run({"preprocess", "--audio", wav, "--pool-factor", "4", "--config", cfg});
  REQUIRE(r.code == 0);
  const auto shapes = json::parse(r.out);
  CHECK(shapes["pool_factor"] == 16);
  CHECK(shapes["mel"] == json::array({3072, 128}));
  CHECK(shapes["pooled_tokens"] == json::array({96, 256}));
  CHECK(omk_run({"preprocess", "--audio", wav, "--config", dir / "missing.json"}).code == 1);
  CHECK(omk_run({"preprocess", "--audio", wav, "--config", dir.file("bad.json", "[1]")}).code == 1);
}

TEST_CASE("build-bench is byte-identical for a fixed seed") {
  TempDir dir("build");
  const auto meta = dir.file("meta.jsonl", metadata_jsonl(20));
  auto build = [&](const std::string& tag, const std::string& seed) {
    return omk_run({"build-bench", "--metadata", meta, "--output", dir / (tag + ".jsonl"), "--split", "ratio",
                    "--train-output", dir / (tag + "_train.jsonl"), "--test-output", dir / (tag + "_test.jsonl"),
                    "--seed", seed});
  };
  REQUIRE(build("a", "3").code == 0);
  REQUIRE(build("b", "3").code == 0);
  REQUIRE(build("c", "4").code == 0);
  for (const char* part : {".jsonl", "_train.jsonl", "_test.jsonl"}) {
    CHECK(omk::io::read_text(dir / (std::string("a") + part)) == omk::io::read_text(dir / (std::string("b") + part)));
  }
  CHECK(omk::io::read_text(dir / "a_test.jsonl") != omk::io::read_text(dir / "c_test.jsonl"));
  const auto train = omk::io::read_jsonl(dir / "a_train.jsonl");
  const auto test = omk::io::read_jsonl(dir / "a_test.jsonl");
  CHECK(train.size() == 16);
  CHECK(test.size() == 4);
  CHECK(test[0].value["dataset"] == "toyset_test");

  const auto m = omk::io::read_json(dir / "a.jsonl.manifest.json");
  for (const char* k : {"command", "argv", "config", "seed", "versions", "outputs", "created_at"}) {
    CHECK(m.contains(k));
  }
  CHECK(m["command"] == "build-bench");
  CHECK(m["seed"] == 3);
  CHECK(m["versions"]["omk"] == omk::cli::kVersion);
  CHECK(m["outputs"].size() == 3);
}

TEST_CASE("tool-use dataset and scoring round trip") {
  TempDir dir("tools");
  REQUIRE(omk_run({"build-bench", "--tool-use", "12", "--output", dir / "tools.jsonl", "--seed", "2"}).code == 0);
  std::string pred;
  std::size_t i = 0;
  for (const auto& line : omk::io::read_jsonl(dir / "tools.jsonl")) {
    pred += json{{"id", i++}, {"prediction", line.value["output"]}}.dump() + "\n";
  }
  const auto r = omk_run({"eval-tools", "--gold", dir / "tools.jsonl", "--pred", dir.file("p.jsonl", pred)});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["accuracy"] == 100.0);
}

TEST_CASE("eval-mcq and report merge") {
  TempDir dir("mcq");
  const auto items = dir.file("items.jsonl",
                              R"({"id": "q1", "question": "Mood?", "options": ["calm", "angry", "sad", "happy"], "answer": "A"})"
                              "\n"
                              R"({"id": "q2", "question": "Tempo?", "options": ["slow", "fast", "medium", "none"], "answer": "B"})"
                              "\n");
  const auto pred = dir.file("pred.jsonl", R"({"id": "q1", "prediction": "(A) calm"})"
                                           "\n"
                                           R"({"id": "q2", "prediction": "no idea"})"
                                           "\n");
  REQUIRE(omk_run({"eval-mcq", "--items", items, "--pred", pred, "--output", dir / "mcq.json"}).code == 0);
  const auto rep = omk::io::read_json(dir / "mcq.json");
  CHECK(rep["accuracy"] == 50.0);
  CHECK(rep["ifr"] == 50.0);
  CHECK(rep["n_items"] == 2);

  REQUIRE(omk_run({"report", "--inputs", dir / "mcq.json", "--output", dir / "all.json"}).code == 0);
  const auto all = omk::io::read_json(dir / "all.json");
  CHECK(all["reports"]["mcq"] == rep);
  CHECK(all["versions"]["metric_tokenizer"] == "omk-simple-v1");
}

TEST_CASE("preprocess writes mel and token files") {
  TempDir dir("pre");
  const auto wav = click_wav(dir, 90);
  const auto r = omk_run({"preprocess", "--audio", wav, "--mel", dir / "x.mel", "--tokens", dir / "x.tok"});
  REQUIRE(r.code == 0);
  const auto shapes = json::parse(r.out);
  CHECK(shapes["tokens"] == json::array({1536, 256}));
  CHECK(shapes["pooled_tokens"] == json::array({192, 256}));
  CHECK(fs::file_size(dir / "x.mel") > 3072u * 128u * 4u);
  CHECK(fs::exists(dir / "x.tok.manifest.json"));
}

TEST_CASE("tiny train-toy run writes its artifacts") {
  TempDir dir("toy");
  const auto r = omk_run({"train-toy", "--output-dir", dir / "run", "--examples", "4", "--pretrain-steps", "2",
                          "--stage1-steps", "2", "--stage2-steps", "1", "--pool-factor", "64", "--lora-rank", "4",
                          "--lora-alpha", "32"});
  REQUIRE(r.code == 0);
  for (const char* f : {"report.json", "manifest.json", "pretrain_log.jsonl", "stage1_log.jsonl", "stage2_log.jsonl",
                        "checkpoint/manifest.json", "checkpoint/tensors.bin"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / (std::string("run/") + f)));
  }
  const auto rep = omk::io::read_json(dir / "run/report.json");
  CHECK(rep["pool_factor"] == 64);
  CHECK(rep["lora"]["rank"] == 4);
  CHECK(rep["stage1"]["base_unchanged"] == true);
  CHECK(rep["stage2"]["base_unchanged"] == true);
  CHECK(omk_run({"train-toy", "--output-dir", dir / "bad", "--examples", "2"}).code == 2);
}
