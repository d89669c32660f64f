#include "omk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "omk/rng.hpp"

namespace omk::synth {

namespace {

audio::WaveformClip silent(double seconds) {
  audio::WaveformClip clip;
  clip.sample_rate = audio::kSampleRate;
  clip.samples.assign(static_cast<std::size_t>(std::llround(seconds * audio::kSampleRate)), 0.0f);
  return clip;
}

void add_noise(audio::WaveformClip& clip, double noise, std::uint64_t seed) {
  if (noise <= 0.0) {
    return;
  }
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  for (auto& s : clip.samples) {
    s += static_cast<float>(noise * rng.uniform(-1.0, 1.0));
  }
}

} // namespace

double midi_to_hz(double midi) { return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0); }

std::vector<double> click_times(const ClickTrackSpec& spec) {
  std::vector<double> times;
  const double period = 60.0 / spec.bpm;
  for (double t = spec.offset; t < spec.seconds - 0.05; t += period) {
    times.push_back(t);
  }
  return times;
}

audio::WaveformClip click_track(const ClickTrackSpec& spec) {
  auto clip = silent(spec.seconds);
  const auto times = click_times(spec);
  constexpr double kClickSeconds = 0.03;
  constexpr double kDecay = 150.0; // 1/s
  const double sr = audio::kSampleRate;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const bool accent = spec.accent_every > 0 && k % static_cast<std::size_t>(spec.accent_every) == 0;
    const double amp = spec.amplitude * (accent ? spec.accent_gain : 1.0);
    const auto start = static_cast<std::size_t>(std::llround(times[k] * sr));
    const auto len = static_cast<std::size_t>(kClickSeconds * sr);
    for (std::size_t i = 0; i < len && start + i < clip.samples.size(); ++i) {
      const double t = static_cast<double>(i) / sr;
      clip.samples[start + i] +=
          static_cast<float>(amp * std::exp(-kDecay * t) * std::sin(2.0 * std::numbers::pi * spec.click_hz * t));
    }
  }
  add_noise(clip, spec.noise, spec.seed);
  return clip;
}

audio::WaveformClip render_tones(const std::vector<ToneSpec>& tones, double seconds, double noise,
                                 std::uint64_t seed) {
  auto clip = silent(seconds);
  const double sr = audio::kSampleRate;
  constexpr double kFade = 0.01;
  Rng rng(seed);
  for (const auto& tone : tones) {
    const auto start = static_cast<std::size_t>(std::llround(tone.start * sr));
    const auto len = static_cast<std::size_t>(std::llround(tone.duration * sr));
    for (double midi : tone.midi) {
      const double hz = midi_to_hz(midi);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < len && start + i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / sr;
        const double edge = std::min(t, tone.duration - t);
        const double env = edge < kFade ? 0.5 - 0.5 * std::cos(std::numbers::pi * edge / kFade) : 1.0;
        clip.samples[start + i] +=
            static_cast<float>(tone.amplitude * env * std::sin(2.0 * std::numbers::pi * hz * t + phase));
      }
    }
  }
  add_noise(clip, noise, seed);
  return clip;
}

audio::WaveformClip major_scale(double tonic_midi, double seconds, double noise, std::uint64_t seed) {
  static constexpr int steps[8] = {0, 2, 4, 5, 7, 9, 11, 12};
  std::vector<ToneSpec> tones;
  const double note = seconds / 8.0;
  for (int i = 0; i < 8; ++i) {
    tones.push_back({{tonic_midi + steps[i]}, i * note, note, 0.3});
  }
  return render_tones(tones, seconds, noise, seed);
}

audio::WaveformClip triad(double root_midi, bool minor, double seconds, double noise, std::uint64_t seed) {
  ToneSpec t{{root_midi, root_midi + (minor ? 3.0 : 4.0), root_midi + 7.0}, 0.0, seconds, 0.2};
  return render_tones({t}, seconds, noise, seed);
}

} // namespace omk::synth
