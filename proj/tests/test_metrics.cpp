#include <cmath>
#include <map>

#include <omp.h>

#include "doctest.h"
#include "omk/error.hpp"
#include "omk/metrics.hpp"
#include "omk/rng.hpp"
#include "oracles.hpp"

using namespace omk;
using namespace omk::metrics;

namespace {

// Deterministic toy embeddings: one vector per token from its hash.
class HashEmbedding : public EmbeddingProvider {
public:
  Embedding embed(std::string_view text) const override {
    Embedding e;
    for (const auto& tok : tokenize(text)) {
      Rng r(fnv1a(tok));
      std::vector<double> v(16);
      for (auto& x : v) {
        x = r.uniform(-1.0, 1.0);
      }
      e.push_back(v);
    }
    return e;
  }
};

class ZeroEmbedding : public EmbeddingProvider {
public:
  Embedding embed(std::string_view) const override { return {{0.0, 0.0}}; }
};

class FailingEmbedding : public EmbeddingProvider {
public:
  Embedding embed(std::string_view) const override { throw std::runtime_error("offline"); }
};

} // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
  CHECK(tokenize("Hello, World!  It's 4/4.") ==
        Tokens{"hello", ",", "world", "!", "it", "'", "s", "4", "/", "4", "."});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("porter stemmer reference words") {
  const std::map<std::string, std::string> cases{
      {"caresses", "caress"},   {"ponies", "poni"},        {"ties", "ti"},           {"cats", "cat"},
      {"feed", "feed"},         {"agreed", "agre"},        {"plastered", "plaster"}, {"motoring", "motor"},
      {"sing", "sing"},         {"conflated", "conflat"},  {"troubled", "troubl"},   {"sized", "size"},
      {"hopping", "hop"},       {"falling", "fall"},       {"hissing", "hiss"},      {"filing", "file"},
      {"happy", "happi"},       {"sky", "sky"},            {"relational", "relat"},  {"conditional", "condit"},
      {"rational", "ration"},   {"digitizer", "digit"},    {"operator", "oper"},     {"feudalism", "feudal"},
      {"hopefulness", "hope"},  {"goodness", "good"},      {"revival", "reviv"},     {"allowance", "allow"},
      {"inference", "infer"},   {"adjustable", "adjust"},  {"replacement", "replac"}, {"adoption", "adopt"},
      {"effective", "effect"},  {"cease", "ceas"},         {"controlling", "control"}, {"roll", "roll"},
      {"generalizations", "gener"}, {"oscillators", "oscil"}, {"playing", "plai"},  {"plays", "plai"}};
  for (const auto& [word, stem] : cases) {
    CAPTURE(word);
    CHECK(porter_stem(word) == stem);
  }
}

TEST_CASE("metrics match brute-force oracles on random pairs") {
  Rng rng(2024);
  std::vector<Tokens> hyps, refs;
  for (int i = 0; i < 150; ++i) {
    const auto h = oracle::random_sentence(rng, 1, 8);
    auto r = oracle::random_sentence(rng, 1, 8);
    if (i % 2 == 0) { // near copies so that higher-order n-grams match
      r = h;
      r[rng.below(r.size())] = "guitar";
    }
    CAPTURE(oracle::join(h));
    CAPTURE(oracle::join(r));
    CHECK(rouge_n(h, r, 1) == doctest::Approx(oracle::rouge1(h, r)).epsilon(1e-12));
    CHECK(rouge_l(h, r) == doctest::Approx(oracle::rougeL(h, r)).epsilon(1e-12));
    CHECK(lcs_length(h, r) == oracle::lcs(h, r));
    const auto a = meteor_align(h, r);
    const auto o = oracle::meteor_alignment(h, r);
    CHECK(a.matches == o.matches);
    CHECK(a.exact_matches == o.exact);
    CHECK(a.chunks == o.chunks);
    CHECK(meteor_lite(h, r) == doctest::Approx(oracle::meteor(h, r)).epsilon(1e-12));
    CHECK(bleu({h}, {r}, 1) == doctest::Approx(oracle::bleu({h}, {r}, 1)).epsilon(1e-12));
    hyps.push_back(h);
    refs.push_back(r);
  }
  CHECK(bleu(hyps, refs, 1) == doctest::Approx(oracle::bleu(hyps, refs, 1)).epsilon(1e-12));
  CHECK(bleu(hyps, refs, 4) == doctest::Approx(oracle::bleu(hyps, refs, 4)).epsilon(1e-12));
  CHECK(bleu(hyps, refs, 4) > 0.0);
}

TEST_CASE("bleu edge cases") {
  CHECK(bleu({{"a", "b"}}, {{"a", "b"}}, 4) == 0.0); // no 3-grams at all
  CHECK(bleu({{"a", "b", "c", "d"}}, {{"a", "b", "c", "d"}}, 4) == doctest::Approx(1.0));
  // brevity penalty exp(1 - 8/4)
  CHECK(bleu({{"a", "b", "c", "d"}}, {{"a", "b", "c", "d", "e", "f", "g", "h"}}, 4) ==
        doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(bleu({}, {}, 4), Error);
  CHECK_THROWS_AS(bleu({{"a"}}, {}, 4), Error);
}

TEST_CASE("meteor worked example") {
  // 6 matches in 2 chunks; P = 6/7, R = 1, frag = 1/3
  const Tokens h = tokenize("the cat sat on the mat today");
  const Tokens r = tokenize("on the mat the cat sat");
  const auto a = meteor_align(h, r);
  CHECK(a.matches == 6);
  CHECK(a.chunks == 2);
  const double p = 6.0 / 7.0, rr = 1.0;
  const double fmean = 10 * p * rr / (rr + 9 * p);
  CHECK(meteor_lite(h, r) == doctest::Approx(fmean * (1 - 0.5 * std::pow(1.0 / 3.0, 3))).epsilon(1e-12));
}

TEST_CASE("stem matches count but exact matches are preferred") {
  const auto a = meteor_align({"plays", "drum"}, {"play", "drums", "plays"});
  CHECK(a.matches == 2);
  CHECK(a.exact_matches == 1);
}

TEST_CASE("identity corpus scores one on surface metrics") {
  const std::vector<std::string> c{"A calm piano piece in C major.", "Fast drums and loud guitars!",
                                   "the singer has a warm voice and the band plays slowly"};
  const HashEmbedding emb;
  const auto rep = evaluate_corpus(c, c, &emb);
  CHECK(rep.bleu1 == doctest::Approx(1.0));
  CHECK(rep.bleu == doctest::Approx(1.0));
  CHECK(rep.rouge1 == doctest::Approx(1.0));
  CHECK(rep.rougeL == doctest::Approx(1.0));
  CHECK(rep.meteor < 1.0);
  CHECK(rep.meteor > 0.99);
  REQUIRE(rep.bertscore.has_value());
  CHECK(*rep.bertscore == doctest::Approx(1.0));
}

TEST_CASE("identity meteor carries only the one-chunk penalty") {
  const Tokens t{"a", "b", "c", "d"};
  CHECK(meteor_lite(t, t) == doctest::Approx(1.0 - 0.5 * std::pow(0.25, 3)));
}

TEST_CASE("report names bleu-4 and the tokenizer") {
  MetricReport r;
  r.bleu = 0.25;
  r.bleu1 = 0.5;
  r.n_items = 3;
  const auto j = report_to_json(r);
  CHECK(j["bleu"] == 25.0);
  CHECK(j["bleu1"] == 50.0);
  CHECK(j["bleu_max_order"] == 4);
  CHECK(j["tokenizer_version"] == std::string(kTokenizerVersion));
  CHECK_FALSE(j.contains("bertscore"));
}

TEST_CASE("corpus evaluation is independent of thread count") {
  Rng rng(8);
  std::vector<std::string> p, r;
  for (int i = 0; i < 60; ++i) {
    p.push_back(oracle::join(oracle::random_sentence(rng, 3, 12)));
    r.push_back(oracle::join(oracle::random_sentence(rng, 3, 12)));
  }
  const auto serial = evaluate_corpus(p, r, nullptr, kernels::Exec::serial);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const auto par = evaluate_corpus(p, r);
    CHECK(par.rouge1 == serial.rouge1);
    CHECK(par.rougeL == serial.rougeL);
    CHECK(par.meteor == serial.meteor);
    CHECK(par.bleu == serial.bleu);
  }
  omp_set_num_threads(omp_get_num_procs());
  CHECK_THROWS_AS(evaluate_corpus({"a"}, {"a", "b"}), Error);
  CHECK_THROWS_AS(evaluate_corpus({}, {}), Error);
}

TEST_CASE("bertscore provider failures are errors") {
  CHECK_THROWS_AS(bertscore_f1("a", "b", ZeroEmbedding{}), Error);
  CHECK_THROWS_AS(bertscore_f1("a", "b", FailingEmbedding{}), Error);
  const HashEmbedding emb;
  const double s = bertscore_f1("slow piano", "fast drums", emb);
  CHECK(s < 1.0);
  CHECK(s == doctest::Approx(bertscore_f1("fast drums", "slow piano", emb)));
}

TEST_CASE("mcq extraction precedence") {
  const std::array<std::string, 4> opts{"Soft yet deeply emotional.", "Loud and aggressive.", "Cheerful pop.",
                                        "Dark ambient."};
  auto label = [&](std::string_view s) -> int {
    const auto e = mcq_extract(s, opts);
    return std::holds_alternative<Label>(e) ? static_cast<int>(std::get<Label>(e)) : -1;
  };
  CHECK(label("(A) Soft yet deeply emotional.") == 0);
  CHECK(label("I think (C) fits best") == 2);
  CHECK(label("B) Loud and aggressive.") == 1);
  CHECK(label("D. because it is dark") == 3);
  CHECK(label("c: cheerful") == -1);
  CHECK(label("dark ambient") == 3);
  CHECK(label("The answer is B") == 1);
  CHECK(label("the answer is: (D)") == 3);
  CHECK(label("The answer is Beautiful") == -1);
  CHECK(label("No idea.") == -1);
  // "(X)" anywhere outranks a leading label
  CHECK(label("A) or maybe (B)") == 1);
}

TEST_CASE("mcq scoring") {
  std::vector<McqItem> items(4);
  for (auto& it : items) {
    it.options = {"w", "x", "y", "z"};
  }
  items[0].gold = Label::A;
  items[0].model_answer = "(A)";
  items[1].gold = Label::B;
  items[1].model_answer = "(C)";
  items[2].gold = Label::C;
  items[2].model_answer = "pass";
  items[3].gold = Label::D;
  items[3].model_answer = "z";
  const auto o = mcq_score(items);
  CHECK(o.accuracy == 0.5);
  CHECK(o.ifr == 0.75);
  CHECK(o.per_item[2] == McqVerdict::no_follow);
  CHECK_THROWS_AS(mcq_score({}), Error);
}

TEST_CASE("random agent scores near chance with full instruction following") {
  Rng rng(99);
  std::vector<McqItem> items(10000);
  for (auto& it : items) {
    it.options = {"one", "two", "three", "four"};
    it.gold = static_cast<Label>(rng.below(4));
    it.model_answer = std::string("(") + label_char(static_cast<Label>(rng.below(4))) + ")";
  }
  const auto o = mcq_score(items);
  CHECK(std::abs(o.accuracy - 0.25) <= 0.03);
  CHECK(o.ifr == 1.0);
}
