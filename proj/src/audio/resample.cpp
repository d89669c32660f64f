#include <cmath>
#include <numbers>
#include <numeric>

#include "omk/audio.hpp"
#include "omk/error.hpp"

namespace omk::audio {

namespace {

constexpr double kZeroCrossings = 32.0;
constexpr double kKaiserBeta = 9.0;
constexpr double kRolloff = 0.97;
constexpr std::int64_t kMaxPhases = 16000;

double sinc(double x) {
  if (std::abs(x) < 1e-12) {
    return 1.0;
  }
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

struct SincKernel {
  double scale;     // normalized cutoff 2*fc/from_rate
  double half_width; // in input samples
  double i0_beta;

  double operator()(double offset) const {
    const double r = offset / half_width;
    if (r <= -1.0 || r >= 1.0) {
      return 0.0;
    }
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    return scale * sinc(scale * offset) * window;
  }
};

} // namespace

std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate, kernels::Exec exec) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw Error("sample rates must be positive");
  }
  if (from_rate == to_rate) {
    return {samples.begin(), samples.end()};
  }

  const auto n_in = static_cast<std::int64_t>(samples.size());
  const std::int64_t n_out = (n_in * to_rate + from_rate - 1) / from_rate;
  const double cutoff = 0.5 * std::min(from_rate, to_rate) * kRolloff;
  const SincKernel kernel{2.0 * cutoff / from_rate, kZeroCrossings * from_rate / (2.0 * cutoff),
                          std::cyl_bessel_i(0.0, kKaiserBeta)};
  const auto taps_each_side = static_cast<std::int64_t>(std::ceil(kernel.half_width));
  const std::int64_t n_taps = 2 * taps_each_side + 1;

  // Output n sits at input position n*from/to = base + phase/L, with L = to/gcd.
  const std::int64_t g = std::gcd(from_rate, to_rate);
  const std::int64_t L = to_rate / g;
  const std::int64_t M = from_rate / g;
  const bool polyphase = L <= kMaxPhases;

  std::vector<double> table;
  if (polyphase) {
    table.resize(static_cast<std::size_t>(L * n_taps));
    for (std::int64_t ph = 0; ph < L; ++ph) {
      const double frac = static_cast<double>(ph) / static_cast<double>(L);
      for (std::int64_t t = 0; t < n_taps; ++t) {
        const double offset = static_cast<double>(t - taps_each_side) - frac;
        table[static_cast<std::size_t>(ph * n_taps + t)] = kernel(offset);
      }
    }
  }

  std::vector<float> out(static_cast<std::size_t>(n_out));
  auto compute = [&](std::int64_t n) {
    const std::int64_t num = n * M;
    const std::int64_t base = num / L;
    const std::int64_t phase = num % L;
    double acc = 0.0;
    for (std::int64_t t = 0; t < n_taps; ++t) {
      const std::int64_t idx = base + t - taps_each_side;
      if (idx < 0 || idx >= n_in) {
        continue;
      }
      const double w = polyphase
                           ? table[static_cast<std::size_t>(phase * n_taps + t)]
                           : kernel(static_cast<double>(t - taps_each_side) -
                                    static_cast<double>(phase) / static_cast<double>(L));
      acc += w * samples[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  };

  if (exec == kernels::Exec::serial) {
    for (std::int64_t n = 0; n < n_out; ++n) {
      compute(n);
    }
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < n_out; ++n) {
      compute(n);
    }
  }
  return out;
}

WaveformClip standardize_clip(const WaveformClip& raw, double target_seconds) {
  if (raw.samples.empty()) {
    throw Error("standardize_clip: empty input");
  }
  if (raw.sample_rate <= 0) {
    throw Error("standardize_clip: non-positive sample rate");
  }
  if (!(target_seconds > 0.0)) {
    throw Error("standardize_clip: non-positive target duration");
  }
  const auto target = static_cast<std::size_t>(std::llround(target_seconds * kSampleRate));
  WaveformClip out;
  out.sample_rate = kSampleRate;
  out.samples = resample(raw.samples, raw.sample_rate, kSampleRate);
  out.samples.resize(target, 0.0f);
  return out;
}

} // namespace omk::audio
