#include <cmath>
#include <cstdio>

#include "omk/error.hpp"
#include "omk/kernels.hpp"
#include "omk/mir.hpp"

namespace omk::mir {

namespace {

constexpr std::size_t kOnsetFft = 512;
constexpr std::size_t kOnsetHop = 160;
constexpr double kFluxCompression = 100.0;

constexpr std::size_t kChromaFft = 4096;
constexpr std::size_t kChromaHop = 800;
constexpr double kChromaMinHz = 55.0;
constexpr double kChromaMaxHz = 5000.0;

void require_standard(const audio::WaveformClip& clip) {
  if (clip.sample_rate != audio::kSampleRate || clip.samples.empty()) {
    throw Error("estimator input must be a non-empty 16 kHz clip");
  }
}

} // namespace

OnsetEnvelope onset_envelope(const audio::WaveformClip& clip) {
  require_standard(clip);
  const kernels::StftShape shape{kOnsetFft, kOnsetFft, kOnsetHop, true};
  const auto power = kernels::stft_power(clip.samples, shape);
  const std::size_t bins = kOnsetFft / 2 + 1;
  const std::size_t frames = power.size() / bins;

  std::vector<double> logmag(power.size());
  for (std::size_t i = 0; i < power.size(); ++i) {
    logmag[i] = std::log1p(kFluxCompression * std::sqrt(power[i]));
  }
  OnsetEnvelope env;
  env.values.assign(frames, 0.0);
  for (std::size_t f = 1; f < frames; ++f) {
    double flux = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double d = logmag[f * bins + b] - logmag[(f - 1) * bins + b];
      flux += d > 0.0 ? d : 0.0;
    }
    env.values[f] = flux;
  }
  return env;
}

Chromagram chromagram(const audio::WaveformClip& clip) {
  require_standard(clip);
  const kernels::StftShape shape{kChromaFft, kChromaFft, kChromaHop, true};
  const auto power = kernels::stft_power(clip.samples, shape);
  const std::size_t bins = kChromaFft / 2 + 1;
  const std::size_t frames = power.size() / bins;

  std::vector<int> bin_pc(bins, -1);
  for (std::size_t b = 1; b < bins; ++b) {
    const double hz = static_cast<double>(b) * audio::kSampleRate / static_cast<double>(kChromaFft);
    if (hz < kChromaMinHz || hz > kChromaMaxHz) {
      continue;
    }
    const long midi = std::lround(69.0 + 12.0 * std::log2(hz / 440.0));
    bin_pc[b] = static_cast<int>(((midi % 12) + 12) % 12);
  }

  Chromagram c;
  c.frame_rate = static_cast<double>(audio::kSampleRate) / static_cast<double>(kChromaHop);
  c.frames.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto& row = c.frames[f];
    row.fill(0.0);
    for (std::size_t b = 0; b < bins; ++b) {
      if (bin_pc[b] >= 0) {
        row[static_cast<std::size_t>(bin_pc[b])] += power[f * bins + b];
      }
    }
  }
  return c;
}

std::string pitch_class_name(int pc) {
  static const char* names[12] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};
  return names[((pc % 12) + 12) % 12];
}

std::string render_chord(int root, Mode quality) {
  return pitch_class_name(root) + (quality == Mode::major ? ":maj" : ":min");
}

std::string render(const KeyLabel& key) { return render_chord(key.tonic, key.mode); }

std::string render(const ChordLabel& chord) { return render_chord(chord.root, chord.quality); }

std::string render_times(const std::vector<double>& times) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f", times[i]);
    if (i > 0) {
      out += ' ';
    }
    out += buf;
  }
  return out;
}

} // namespace omk::mir
