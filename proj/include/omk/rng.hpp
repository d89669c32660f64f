#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace omk {

// std::mt19937_64 output is fixed by the standard; the distributions are not.
// These helpers derive values from raw engine output so that seeded results
// are identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates over an index vector 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a(std::span<const unsigned char> bytes);

} // namespace omk
