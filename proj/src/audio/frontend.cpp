#include <algorithm>
#include <cmath>

#include "omk/audio.hpp"
#include "omk/error.hpp"
#include "omk/rng.hpp"

namespace omk::audio {

bool is_default_pool_factor(std::size_t factor) {
  return factor >= 1 && factor <= 128 && (factor & (factor - 1)) == 0;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(std::size_t n_filters, double f_min, double f_max) {
  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(f_max);
  std::vector<double> hz(n_filters + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  }
  return hz;
}

const std::vector<double>& default_filterbank() {
  static const std::vector<double> bank = mel_filterbank();
  return bank;
}

} // namespace

std::vector<double> mel_center_frequencies(std::size_t n_filters, double f_min, double f_max) {
  const auto edges = mel_edges(n_filters, f_min, f_max);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> mel_filterbank(std::size_t n_filters, std::size_t n_fft, int sample_rate, double f_min,
                                   double f_max) {
  const std::size_t n_bins = n_fft / 2 + 1;
  const auto edges = mel_edges(n_filters, f_min, f_max);
  std::vector<double> bank(n_filters * n_bins, 0.0);
  for (std::size_t m = 0; m < n_filters; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      bank[m * n_bins + b] = w;
    }
  }
  return bank;
}

std::vector<double> mel_energies(std::span<const float> segment, kernels::Exec exec) {
  const kernels::StftShape shape{kFftSize, kWindowLength, kHop, true};
  const auto power = kernels::stft_power(segment, shape, exec);
  const std::size_t n_bins = kFftSize / 2 + 1;
  const std::size_t frames = power.size() / n_bins;
  std::vector<double> mel(frames * kMelBins);
  if (exec == kernels::Exec::serial) {
    kernels::serial::apply_filterbank(power, frames, n_bins, default_filterbank(), kMelBins, mel);
  } else {
    kernels::parallel::apply_filterbank(power, frames, n_bins, default_filterbank(), kMelBins, mel);
  }
  return mel;
}

MelSpectrogram mel_spectrogram(const WaveformClip& clip, kernels::Exec exec) {
  if (clip.sample_rate != kSampleRate || clip.samples.size() != kClipSamples) {
    throw Error("mel_spectrogram: input is not a standardized 30 s / 16 kHz clip");
  }
  const auto floor_value = static_cast<float>(std::log(kLogEpsilon));
  MelSpectrogram mel;
  mel.n_frames = kFrames;
  mel.n_bins = kMelBins;
  mel.values.assign(kFrames * kMelBins, floor_value);

  for (std::size_t s = 0; s < kSegments; ++s) {
    const std::span<const float> segment(clip.samples.data() + s * kSegmentSamples, kSegmentSamples);
    const auto energies = mel_energies(segment, exec);
    const std::size_t frames = std::min(energies.size() / kMelBins, kSegmentFrames);
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t b = 0; b < kMelBins; ++b) {
        mel.at(s * kSegmentFrames + f, b) =
            static_cast<float>(std::log(energies[f * kMelBins + b] + kLogEpsilon));
      }
    }
  }
  return mel;
}

MelSpectrogram normalize_mel(const MelSpectrogram& mel, std::optional<NormStats> fixed) {
  NormStats stats;
  if (fixed) {
    stats = *fixed;
    if (!(stats.stddev > 0.0)) {
      throw Error("normalize_mel: standard deviation must be positive");
    }
  } else {
    double sum = 0.0;
    for (float v : mel.values) {
      sum += v;
    }
    const double n = static_cast<double>(mel.values.size());
    stats.mean = n > 0 ? sum / n : 0.0;
    double ss = 0.0;
    for (float v : mel.values) {
      ss += (v - stats.mean) * (v - stats.mean);
    }
    stats.stddev = n > 0 ? std::sqrt(ss / n) : 0.0;
  }
  MelSpectrogram out = mel;
  for (auto& v : out.values) {
    v = stats.stddev > 0.0 ? static_cast<float>((v - stats.mean) / stats.stddev) : 0.0f;
  }
  return out;
}

TokenGrid patchify(const MelSpectrogram& mel) {
  if (mel.n_frames != kFrames || mel.n_bins != kMelBins || mel.values.size() != kFrames * kMelBins) {
    throw Error("patchify: expected a (3072, 128) mel-spectrogram");
  }
  constexpr std::size_t time_patches = kSegmentFrames / kPatch;
  constexpr std::size_t freq_patches = kMelBins / kPatch;
  TokenGrid grid;
  grid.n_tokens = kTokens;
  grid.dim = kPatchDim;
  grid.values.resize(kTokens * kPatchDim);
  for (std::size_t s = 0; s < kSegments; ++s) {
    for (std::size_t tp = 0; tp < time_patches; ++tp) {
      for (std::size_t fp = 0; fp < freq_patches; ++fp) {
        const std::size_t token = s * kTokensPerSegment + tp * freq_patches + fp;
        float* dst = grid.values.data() + token * kPatchDim;
        for (std::size_t r = 0; r < kPatch; ++r) {
          const std::size_t frame = s * kSegmentFrames + tp * kPatch + r;
          for (std::size_t c = 0; c < kPatch; ++c) {
            dst[r * kPatch + c] = mel.at(frame, fp * kPatch + c);
          }
        }
      }
    }
  }
  return grid;
}

TokenGrid mean_pool_tokens(const TokenGrid& grid, PoolConfig cfg, kernels::Exec exec) {
  if (cfg.factor == 0 || grid.n_tokens % cfg.factor != 0) {
    throw Error("mean_pool_tokens: pooling factor " + std::to_string(cfg.factor) + " does not divide " +
                std::to_string(grid.n_tokens) + " tokens");
  }
  TokenGrid out;
  out.n_tokens = grid.n_tokens / cfg.factor;
  out.dim = grid.dim;
  out.values.resize(out.n_tokens * out.dim);
  if (cfg.factor == 1) {
    out.values = grid.values;
    return out;
  }
  if (exec == kernels::Exec::serial) {
    kernels::serial::mean_pool(grid.values, grid.n_tokens, grid.dim, cfg.factor, out.values);
  } else {
    kernels::parallel::mean_pool(grid.values, grid.n_tokens, grid.dim, cfg.factor, out.values);
  }
  return out;
}

WaveformClip white_noise_clip(double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) {
    throw Error("white_noise_clip: duration must be positive");
  }
  WaveformClip clip;
  clip.sample_rate = kSampleRate;
  clip.samples.resize(static_cast<std::size_t>(std::llround(seconds * kSampleRate)));
  Rng rng(seed);
  for (auto& s : clip.samples) {
    s = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return clip;
}

} // namespace omk::audio
