#pragma once

// Audio front-end: clip standardization, the fixed-shape log-mel
// representation, 16x16 patch tokens and token mean-pooling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omk/kernels.hpp"

namespace omk::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr double kClipSeconds = 30.0;
inline constexpr std::size_t kClipSamples = 480000;
inline constexpr std::size_t kSegments = 3;
inline constexpr std::size_t kSegmentSamples = kClipSamples / kSegments;
inline constexpr std::size_t kSegmentFrames = 1024;
inline constexpr std::size_t kFrames = kSegments * kSegmentFrames; // 3072
inline constexpr std::size_t kMelBins = 128;
inline constexpr std::size_t kWindowLength = 400; // 25 ms
inline constexpr std::size_t kHop = 160;          // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr double kLogEpsilon = 1e-10;
inline constexpr std::size_t kPatch = 16;
inline constexpr std::size_t kPatchDim = kPatch * kPatch;                               // 256
inline constexpr std::size_t kTokensPerSegment = (kSegmentFrames / kPatch) * (kMelBins / kPatch); // 512
inline constexpr std::size_t kTokens = kSegments * kTokensPerSegment;                   // 1536

struct WaveformClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Row-major frames x bins log-mel energies.
struct MelSpectrogram {
  std::size_t n_frames = 0;
  std::size_t n_bins = 0;
  std::vector<float> values;

  float at(std::size_t frame, std::size_t bin) const { return values[frame * n_bins + bin]; }
  float& at(std::size_t frame, std::size_t bin) { return values[frame * n_bins + bin]; }
};

/// n_tokens x dim, row-major.
struct TokenGrid {
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> token(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

struct PoolConfig {
  std::size_t factor = 1;
};

/// Pooling factors accepted by default (powers of two from 1 to 128).
bool is_default_pool_factor(std::size_t factor);

/// Resamples to 16 kHz (windowed-sinc interpolation) and pads with zeros or
/// truncates to exactly target_seconds. A clip already at 16 kHz and of the
/// target length is returned unchanged.
WaveformClip standardize_clip(const WaveformClip& raw, double target_seconds = kClipSeconds);

/// Band-limited sample-rate conversion. Exposed for the tests and the MIR
/// estimators; standardize_clip is the usual entry point.
std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate,
                            kernels::Exec exec = kernels::Exec::parallel);

/// 128 triangular filters on the HTK mel scale spanning 0..8000 Hz, sampled at
/// the n_fft/2+1 bin frequencies. Row-major filters x bins. Triangles have unit
/// height; a filter narrower than the bin spacing may catch no bin at all.
std::vector<double> mel_filterbank(std::size_t n_filters = kMelBins, std::size_t n_fft = kFftSize,
                                   int sample_rate = kSampleRate, double f_min = 0.0,
                                   double f_max = 8000.0);

/// Center frequency in Hz of each mel filter.
std::vector<double> mel_center_frequencies(std::size_t n_filters = kMelBins, double f_min = 0.0,
                                           double f_max = 8000.0);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// (3072, 128) log-mel: three 10 s segments, each a centered 25 ms / 10 ms
/// STFT right-padded with ln(eps) to 1024 frames.
MelSpectrogram mel_spectrogram(const WaveformClip& clip, kernels::Exec exec = kernels::Exec::parallel);

/// Pre-log mel energies of one segment (unpadded frames x 128). Used by the
/// energy-monotonicity checks.
std::vector<double> mel_energies(std::span<const float> segment, kernels::Exec exec = kernels::Exec::parallel);

struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Z-normalizes log-mel values. Without `fixed`, statistics come from the clip
/// itself; a constant clip maps to all zeros.
MelSpectrogram normalize_mel(const MelSpectrogram& mel, std::optional<NormStats> fixed = std::nullopt);

/// Non-overlapping 16x16 patches, per segment in time-major raster order:
/// token = segment*512 + (frame/16)*8 + bin/16, patch flattened row-major.
TokenGrid patchify(const MelSpectrogram& mel);

TokenGrid mean_pool_tokens(const TokenGrid& grid, PoolConfig cfg,
                           kernels::Exec exec = kernels::Exec::parallel);

/// Uniform white noise in [-1, 1] at 16 kHz, reproducible from `seed`.
WaveformClip white_noise_clip(double seconds, std::uint64_t seed);

// WAV and binary I/O.

/// Reads mono PCM WAV (16-bit integer or 32-bit float).
WaveformClip read_wav(const std::filesystem::path& path);
WaveformClip parse_wav(std::span<const unsigned char> bytes);
/// Writes 16-bit PCM mono (float32 when `as_float` is set).
std::string encode_wav(const WaveformClip& clip, bool as_float = false);
void write_wav(const std::filesystem::path& path, const WaveformClip& clip, bool as_float = false);

/// "OMKMEL1\0", u32 frames, u32 bins, then row-major float32, little-endian.
std::string encode_mel(const MelSpectrogram& mel);
MelSpectrogram decode_mel(std::span<const unsigned char> bytes);

/// Same layout as the mel export with magic "OMKTOK1\0" (tokens, dim).
std::string encode_tokens(const TokenGrid& grid);
TokenGrid decode_tokens(std::span<const unsigned char> bytes);

} // namespace omk::audio
