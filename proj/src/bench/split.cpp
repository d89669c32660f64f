#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "omk/bench.hpp"
#include "omk/error.hpp"
#include "omk/rng.hpp"

namespace omk::bench {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const std::vector<std::string>& ids,
                                                                            const SplitSpec& spec) {
  const std::size_t n = ids.size();
  if (n == 0) {
    throw Error("cannot split an empty record list");
  }
  std::vector<bool> in_test(n, false);
  Rng rng(spec.seed);

  if (spec.mode == SplitSpec::Mode::ratio) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw Error("train_fraction must lie in (0, 1)");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    const auto perm = shuffled_indices(n, rng);
    for (std::size_t k = n_train; k < n; ++k) {
      in_test[perm[k]] = true;
    }
  } else {
    if (spec.pinned_test_ids.empty()) {
      throw Error("seeded_topup split needs pinned test ids");
    }
    if (spec.target_test_size > n) {
      throw Error("target test size " + std::to_string(spec.target_test_size) + " exceeds the " + std::to_string(n) +
                  " available records");
    }
    std::unordered_multimap<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < n; ++i) {
      by_id.emplace(ids[i], i);
    }
    for (const auto& id : spec.pinned_test_ids) {
      auto [lo, hi] = by_id.equal_range(id);
      if (lo == hi) {
        throw Error("pinned test id " + id + " is not among the records");
      }
      for (auto it = lo; it != hi; ++it) {
        in_test[it->second] = true;
      }
    }
    auto have = static_cast<std::size_t>(std::count(in_test.begin(), in_test.end(), true));
    if (have > spec.target_test_size) {
      throw Error("pinned records (" + std::to_string(have) + ") exceed the target test size " +
                  std::to_string(spec.target_test_size));
    }
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_test[i]) {
        pool.push_back(i);
      }
    }
    const auto perm = shuffled_indices(pool.size(), rng);
    for (std::size_t k = 0; have < spec.target_test_size; ++k, ++have) {
      in_test[pool[perm[k]]] = true;
    }
  }

  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? out.second : out.first).push_back(i);
  }
  return out;
}

Split split_dataset(const std::vector<BenchRecord>& records, const SplitSpec& spec) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) {
    ids.push_back(r.local_audio_path);
  }
  const auto [train, test] = split_indices(ids, spec);
  Split s;
  for (auto i : train) {
    s.train.push_back(records[i]);
  }
  for (auto i : test) {
    s.test.push_back(records[i]);
  }
  return s;
}

} // namespace omk::bench
