#pragma once

// Text metrics (BLEU-1/BLEU-4, ROUGE-1, ROUGE-L, METEOR without synonym
// resources, BERTScore over a pluggable embedding provider) and the
// multiple-choice harness.

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "omk/kernels.hpp"

namespace omk::metrics {

inline constexpr std::string_view kTokenizerVersion = "omk-simple-v1";

using Tokens = std::vector<std::string>;

/// Lowercases ASCII, splits on whitespace and detaches every ASCII
/// punctuation character as its own token.
Tokens tokenize(std::string_view text);

/// Porter (1980) stemmer over lowercase ASCII words.
std::string porter_stem(std::string_view word);

/// Corpus BLEU: clipped n-gram precisions pooled over the corpus, uniform
/// geometric mean over n = 1..max_n, brevity penalty min(1, exp(1 - r/c)).
/// Unsmoothed: any zero precision gives 0.
double bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references, int max_n = 4);

/// ROUGE-N F1 with clipped n-gram overlap.
double rouge_n(const Tokens& hyp, const Tokens& ref, int n = 1);

/// ROUGE-L F1 from the longest common subsequence.
double rouge_l(const Tokens& hyp, const Tokens& ref);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t exact_matches = 0;
  std::size_t chunks = 0;
  bool exhaustive = true; // false if the search hit its node budget
};

/// Alignment over exact then stem matches: maximum matches, then maximum
/// exact matches, then fewest chunks.
MeteorAlignment meteor_align(const Tokens& hyp, const Tokens& ref, std::size_t node_budget = 2'000'000);

double meteor_lite(const Tokens& hyp, const Tokens& ref, const MeteorParams& params = {});
double meteor_from_alignment(const MeteorAlignment& a, std::size_t hyp_len, std::size_t ref_len,
                             const MeteorParams& params = {});

// BERTScore

using Embedding = std::vector<std::vector<double>>; // one vector per token

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  /// Token-level vectors of a fixed width. Must be deterministic.
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Greedy cosine matching F1. Throws omk::Error on provider failure or a
/// zero-norm vector.
double bertscore_f1(std::string_view hyp, std::string_view ref, const EmbeddingProvider& provider);

// Multiple choice

enum class Label : int { A = 0, B, C, D };
struct NoFollow {};
using Extraction = std::variant<Label, NoFollow>;

char label_char(Label l);
std::optional<Label> parse_label(char c);

/// Precedence: "(X)" anywhere; "X)" / "X." / "X:" at the start; the full text
/// of one option (case-insensitive); "answer is X". First rule to fire wins.
Extraction mcq_extract(std::string_view answer, const std::array<std::string, 4>& options);

struct McqItem {
  std::string question;
  std::array<std::string, 4> options;
  Label gold = Label::A;
  std::string model_answer;
};

enum class McqVerdict { correct, wrong, no_follow };

struct McqOutcome {
  double accuracy = 0.0;
  double ifr = 0.0;
  std::vector<McqVerdict> per_item;
};

McqOutcome mcq_score(const std::vector<McqItem>& items);

// Corpus evaluation

struct MetricReport {
  double bleu1 = 0.0;
  double bleu = 0.0; // BLEU-4
  double rouge1 = 0.0;
  double rougeL = 0.0;
  double meteor = 0.0;
  std::optional<double> bertscore;
  std::size_t n_items = 0;
};

struct PairScores {
  double rouge1 = 0.0;
  double rougeL = 0.0;
  double meteor = 0.0;
  double bertscore = 0.0;
};

/// Surface metrics over a corpus. Per-pair work fans out over OpenMP threads
/// (Exec::parallel) and is reduced in index order, so the result does not
/// depend on the thread count.
MetricReport evaluate_corpus(const std::vector<std::string>& predictions,
                             const std::vector<std::string>& references,
                             const EmbeddingProvider* provider = nullptr,
                             kernels::Exec exec = kernels::Exec::parallel);

/// Report in percent, with tokenizer version and BLEU order.
nlohmann::ordered_json report_to_json(const MetricReport& report);

} // namespace omk::metrics
