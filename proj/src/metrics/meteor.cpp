#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "omk/metrics.hpp"

namespace omk::metrics {

namespace {

// Depth-first branch and bound over hypothesis positions. Every complete
// alignment has the same match count and exact-match count (both are fixed by
// the per-word and per-stem multiplicities), so the search only has to find
// the one with the most adjacent continuations, i.e. the fewest chunks.
class AlignmentSearch {
public:
  AlignmentSearch(const Tokens& hyp, const Tokens& ref, std::size_t budget) : budget_(budget) {
    std::unordered_map<std::string, int> word_ids;
    std::unordered_map<std::string, int> stem_ids;
    auto intern = [](std::unordered_map<std::string, int>& ids, const std::string& s) {
      auto [it, inserted] = ids.try_emplace(s, static_cast<int>(ids.size()));
      return it->second;
    };
    for (const auto& t : hyp) {
      hyp_word_.push_back(intern(word_ids, t));
      hyp_stem_.push_back(intern(stem_ids, porter_stem(t)));
    }
    for (const auto& t : ref) {
      ref_word_.push_back(intern(word_ids, t));
      ref_stem_.push_back(intern(stem_ids, porter_stem(t)));
    }
    n_words_ = word_ids.size();
    n_stems_ = stem_ids.size();

    // Suffix counts of hypothesis tokens per word / stem.
    hyp_word_suffix_.assign((hyp.size() + 1) * n_words_, 0);
    hyp_stem_suffix_.assign((hyp.size() + 1) * n_stems_, 0);
    for (std::size_t i = hyp.size(); i-- > 0;) {
      for (std::size_t w = 0; w < n_words_; ++w) {
        hyp_word_suffix_[i * n_words_ + w] = hyp_word_suffix_[(i + 1) * n_words_ + w];
      }
      for (std::size_t s = 0; s < n_stems_; ++s) {
        hyp_stem_suffix_[i * n_stems_ + s] = hyp_stem_suffix_[(i + 1) * n_stems_ + s];
      }
      ++hyp_word_suffix_[i * n_words_ + static_cast<std::size_t>(hyp_word_[i])];
      ++hyp_stem_suffix_[i * n_stems_ + static_cast<std::size_t>(hyp_stem_[i])];
    }
    ref_word_free_.assign(n_words_, 0);
    ref_stem_free_.assign(n_stems_, 0);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      ++ref_word_free_[static_cast<std::size_t>(ref_word_[j])];
      ++ref_stem_free_[static_cast<std::size_t>(ref_stem_[j])];
    }
    target_total_ = bound_total(0);
    target_exact_ = bound_exact(0);
    used_.assign(ref.size(), false);
  }

  MeteorAlignment run() {
    MeteorAlignment out;
    out.matches = target_total_;
    out.exact_matches = target_exact_;
    if (target_total_ == 0) {
      out.chunks = 0;
      return out;
    }
    dfs(0, -1, 0, 0, 0);
    out.chunks = target_total_ - static_cast<std::size_t>(best_cont_);
    out.exhaustive = !exhausted_;
    return out;
  }

private:
  std::vector<int> hyp_word_, hyp_stem_, ref_word_, ref_stem_;
  std::size_t n_words_ = 0, n_stems_ = 0;
  std::vector<int> hyp_word_suffix_, hyp_stem_suffix_;
  std::vector<int> ref_word_free_, ref_stem_free_;
  std::vector<bool> used_;
  std::size_t target_total_ = 0, target_exact_ = 0;
  long best_cont_ = -1;
  std::size_t nodes_ = 0;
  std::size_t budget_;
  bool exhausted_ = false;

  std::size_t bound_total(std::size_t i) const {
    std::size_t b = 0;
    for (std::size_t s = 0; s < n_stems_; ++s) {
      b += static_cast<std::size_t>(std::min(hyp_stem_suffix_[i * n_stems_ + s], ref_stem_free_[s]));
    }
    return b;
  }

  std::size_t bound_exact(std::size_t i) const {
    std::size_t b = 0;
    for (std::size_t w = 0; w < n_words_; ++w) {
      b += static_cast<std::size_t>(std::min(hyp_word_suffix_[i * n_words_ + w], ref_word_free_[w]));
    }
    return b;
  }

  void take(std::size_t j, int delta) {
    used_[j] = delta < 0;
    ref_word_free_[static_cast<std::size_t>(ref_word_[j])] += delta;
    ref_stem_free_[static_cast<std::size_t>(ref_stem_[j])] += delta;
  }

  void dfs(std::size_t i, long prev_ref, std::size_t matched, std::size_t exact, long cont) {
    if (exhausted_) {
      return;
    }
    if (++nodes_ > budget_ && best_cont_ >= 0) {
      exhausted_ = true;
      return;
    }
    if (cont + static_cast<long>(target_total_ - matched) <= best_cont_) {
      return;
    }
    if (matched + bound_total(i) < target_total_ || exact + bound_exact(i) < target_exact_) {
      return;
    }
    if (i == hyp_word_.size()) {
      best_cont_ = cont; // feasibility checks above guarantee the targets are met
      return;
    }

    const int w = hyp_word_[i];
    const int s = hyp_stem_[i];
    auto try_ref = [&](std::size_t j) {
      const bool is_exact = ref_word_[j] == w;
      take(j, -1);
      const long c = cont + (prev_ref >= 0 && static_cast<long>(j) == prev_ref + 1 ? 1 : 0);
      dfs(i + 1, static_cast<long>(j), matched + 1, exact + (is_exact ? 1 : 0), c);
      take(j, +1);
    };

    // Continuation first, then exact matches, then stem matches, then skip.
    std::size_t first = ref_word_.size();
    if (prev_ref >= 0 && static_cast<std::size_t>(prev_ref + 1) < ref_word_.size()) {
      const auto j = static_cast<std::size_t>(prev_ref + 1);
      if (!used_[j] && ref_stem_[j] == s) {
        first = j;
        try_ref(j);
      }
    }
    for (std::size_t j = 0; j < ref_word_.size(); ++j) {
      if (j != first && !used_[j] && ref_word_[j] == w) {
        try_ref(j);
      }
    }
    for (std::size_t j = 0; j < ref_word_.size(); ++j) {
      if (j != first && !used_[j] && ref_word_[j] != w && ref_stem_[j] == s) {
        try_ref(j);
      }
    }
    dfs(i + 1, -1, matched, exact, cont);
  }
};

} // namespace

MeteorAlignment meteor_align(const Tokens& hyp, const Tokens& ref, std::size_t node_budget) {
  return AlignmentSearch(hyp, ref, node_budget).run();
}

double meteor_from_alignment(const MeteorAlignment& a, std::size_t hyp_len, std::size_t ref_len,
                             const MeteorParams& params) {
  if (a.matches == 0 || hyp_len == 0 || ref_len == 0) {
    return 0.0;
  }
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(hyp_len);
  const double r = m / static_cast<double>(ref_len);
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty = params.gamma * std::pow(static_cast<double>(a.chunks) / m, params.beta);
  return fmean * (1.0 - penalty);
}

double meteor_lite(const Tokens& hyp, const Tokens& ref, const MeteorParams& params) {
  return meteor_from_alignment(meteor_align(hyp, ref), hyp.size(), ref.size(), params);
}

} // namespace omk::metrics
