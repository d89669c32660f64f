#include <algorithm>
#include <exception>

#include "omk/error.hpp"
#include "omk/metrics.hpp"

namespace omk::metrics {

MetricReport evaluate_corpus(const std::vector<std::string>& predictions, const std::vector<std::string>& references,
                             const EmbeddingProvider* provider, kernels::Exec exec) {
  if (predictions.size() != references.size()) {
    throw Error("evaluate_corpus: " + std::to_string(predictions.size()) + " predictions vs " +
                std::to_string(references.size()) + " references");
  }
  if (predictions.empty()) {
    throw Error("evaluate_corpus: empty corpus");
  }
  const std::size_t n = predictions.size();
  std::vector<Tokens> hyps(n);
  std::vector<Tokens> refs(n);
  std::vector<PairScores> pairs(n);

  auto score_pair = [&](std::size_t i) {
    hyps[i] = tokenize(predictions[i]);
    refs[i] = tokenize(references[i]);
    pairs[i].rouge1 = rouge_n(hyps[i], refs[i], 1);
    pairs[i].rougeL = rouge_l(hyps[i], refs[i]);
    pairs[i].meteor = meteor_lite(hyps[i], refs[i]);
    if (provider != nullptr) {
      pairs[i].bertscore = bertscore_f1(predictions[i], references[i], *provider);
    }
  };

  if (exec == kernels::Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) {
      score_pair(i);
    }
  } else {
    // Exceptions must not escape an OpenMP region; keep the first one.
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        score_pair(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(omk_corpus_failure)
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
    if (failure) {
      std::rethrow_exception(failure);
    }
  }

  MetricReport report;
  report.n_items = n;
  report.bleu1 = bleu(hyps, refs, 1);
  report.bleu = bleu(hyps, refs, 4);
  PairScores sum;
  for (const auto& p : pairs) { // fixed-order reduction
    sum.rouge1 += p.rouge1;
    sum.rougeL += p.rougeL;
    sum.meteor += p.meteor;
    sum.bertscore += p.bertscore;
  }
  const auto dn = static_cast<double>(n);
  report.rouge1 = sum.rouge1 / dn;
  report.rougeL = sum.rougeL / dn;
  report.meteor = sum.meteor / dn;
  if (provider != nullptr) {
    report.bertscore = std::clamp(sum.bertscore / dn, 0.0, 1.0);
  }
  return report;
}

nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["bleu1"] = 100.0 * r.bleu1;
  j["bleu"] = 100.0 * r.bleu;
  j["rouge1"] = 100.0 * r.rouge1;
  j["rougeL"] = 100.0 * r.rougeL;
  j["meteor_lite"] = 100.0 * r.meteor;
  if (r.bertscore) {
    j["bertscore"] = 100.0 * *r.bertscore;
  }
  j["bleu_max_order"] = 4;
  j["n_items"] = r.n_items;
  j["tokenizer_version"] = std::string(kTokenizerVersion);
  return j;
}

} // namespace omk::metrics
