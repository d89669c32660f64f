#include <algorithm>
#include <cmath>
#include <map>

#include "omk/error.hpp"
#include "omk/metrics.hpp"

namespace omk::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& t, std::size_t n) {
  NgramCounts counts;
  if (t.size() < n || n == 0) {
    return counts;
  }
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& hyp, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, c] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) {
      overlap += std::min(c, it->second);
    }
  }
  return overlap;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

} // namespace

double bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references, int max_n) {
  if (hypotheses.size() != references.size()) {
    throw Error("bleu: hypothesis/reference count mismatch");
  }
  if (hypotheses.empty()) {
    throw Error("bleu: empty corpus");
  }
  if (max_n < 1) {
    throw Error("bleu: max_n must be positive");
  }
  const auto order = static_cast<std::size_t>(max_n);
  std::vector<std::size_t> matched(order, 0);
  std::vector<std::size_t> total(order, 0);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    hyp_len += hypotheses[s].size();
    ref_len += references[s].size();
    for (std::size_t n = 1; n <= order; ++n) {
      const auto h = count_ngrams(hypotheses[s], n);
      const auto r = count_ngrams(references[s], n);
      matched[n - 1] += clipped_overlap(h, r);
      total[n - 1] += hypotheses[s].size() >= n ? hypotheses[s].size() - n + 1 : 0;
    }
  }
  if (hyp_len == 0) {
    return 0.0;
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < order; ++n) {
    if (matched[n] == 0 || total[n] == 0) {
      return 0.0;
    }
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  const double c = static_cast<double>(hyp_len);
  const double r = static_cast<double>(ref_len);
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(order));
}

double rouge_n(const Tokens& hyp, const Tokens& ref, int n) {
  if (n < 1) {
    throw Error("rouge_n: n must be positive");
  }
  const auto un = static_cast<std::size_t>(n);
  if (hyp.size() < un || ref.size() < un) {
    return 0.0;
  }
  const double overlap = static_cast<double>(clipped_overlap(count_ngrams(hyp, un), count_ngrams(ref, un)));
  const double p = overlap / static_cast<double>(hyp.size() - un + 1);
  const double r = overlap / static_cast<double>(ref.size() - un + 1);
  return f1(p, r);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) {
    return 0.0;
  }
  const double l = static_cast<double>(lcs_length(hyp, ref));
  return f1(l / static_cast<double>(hyp.size()), l / static_cast<double>(ref.size()));
}

} // namespace omk::metrics
