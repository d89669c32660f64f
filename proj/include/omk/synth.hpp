#pragma once

// Synthetic test signals with known ground truth.

#include <cstdint>
#include <vector>

#include "omk/audio.hpp"

namespace omk::synth {

struct ClickTrackSpec {
  double bpm = 120.0;
  double seconds = 30.0;
  double offset = 0.0;        // time of the first click
  int accent_every = 0;       // 0: no accents
  double accent_gain = 2.0;
  double amplitude = 0.4;
  double noise = 0.0;         // white-noise amplitude
  double click_hz = 1000.0;   // decaying sine burst frequency
  std::uint64_t seed = 0;
};

audio::WaveformClip click_track(const ClickTrackSpec& spec);
/// Ground-truth click times of a spec.
std::vector<double> click_times(const ClickTrackSpec& spec);

double midi_to_hz(double midi);

struct ToneSpec {
  std::vector<double> midi; // simultaneous pitches
  double start = 0.0;
  double duration = 1.0;
  double amplitude = 0.2;
};

/// Sums sine tones with short raised-cosine fades, plus optional noise.
audio::WaveformClip render_tones(const std::vector<ToneSpec>& tones, double seconds, double noise = 0.0,
                                 std::uint64_t seed = 0);

/// Ascending major scale from `tonic_midi` (8 notes, one octave) spread over `seconds`.
audio::WaveformClip major_scale(double tonic_midi, double seconds = 30.0, double noise = 0.0,
                                std::uint64_t seed = 0);

/// Sustained triad (root, third, fifth) from `root_midi` over [start, end].
audio::WaveformClip triad(double root_midi, bool minor, double seconds = 30.0, double noise = 0.0,
                          std::uint64_t seed = 0);

} // namespace omk::synth
