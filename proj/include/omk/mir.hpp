#pragma once

// Desk-scale MIR estimators: tempo, key, chords and downbeats. All of them run
// on their own STFT of a standardized 16 kHz clip.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "omk/audio.hpp"

namespace omk::mir {

inline constexpr double kOnsetFrameRate = 100.0; // frames per second

struct OnsetEnvelope {
  std::vector<double> values; // spectral flux, non-negative
  double frame_rate = kOnsetFrameRate;
};

/// Log-magnitude spectral flux, half-wave rectified, 100 frames/s.
OnsetEnvelope onset_envelope(const audio::WaveformClip& clip);

/// Chroma frames (12 pitch classes each), squared magnitude folded by nearest
/// equal-tempered pitch between 55 Hz and 5 kHz.
struct Chromagram {
  std::vector<std::array<double, 12>> frames;
  double frame_rate = 0.0;
};
Chromagram chromagram(const audio::WaveformClip& clip);

enum class Mode { major, minor };

struct KeyLabel {
  int tonic = 0; // pitch class, 0 = C
  Mode mode = Mode::major;
  friend bool operator==(const KeyLabel&, const KeyLabel&) = default;
};

struct ChordLabel {
  int root = 0;
  Mode quality = Mode::major;
  double start = 0.0;
  double end = 0.0;
};

struct BeatGrid {
  std::vector<double> beat_times;
  std::vector<double> downbeat_times;
  int meter = 4;
  bool low_confidence = false;
};

std::string pitch_class_name(int pc);
/// "C:maj" / "A:min"
std::string render(const KeyLabel& key);
std::string render_chord(int root, Mode quality);
std::string render(const ChordLabel& chord);
/// Space-separated seconds with two decimals.
std::string render_times(const std::vector<double>& times);

/// Autocorrelation of the onset envelope over 40-240 BPM with 1/lag weighting,
/// refined by parabolic interpolation; rounded to one decimal.
double estimate_tempo(const audio::WaveformClip& clip);
double estimate_tempo(const OnsetEnvelope& env);

struct KeyProfiles {
  std::array<double, 12> major;
  std::array<double, 12> minor;
};
/// Krumhansl-Kessler probe-tone profiles.
const KeyProfiles& krumhansl_profiles();

/// Correlation of the mean chroma against the 24 rotated profiles. Ties go
/// to the lower pitch class, then major.
KeyLabel detect_key(const audio::WaveformClip& clip, const KeyProfiles& profiles = krumhansl_profiles());
KeyLabel key_from_chroma(const std::array<double, 12>& chroma, const KeyProfiles& profiles = krumhansl_profiles());

/// Frame-wise 24-triad template matching over [t1, t2] with a 0.5 s median
/// filter; segments shorter than 0.3 s are absorbed. Output tiles [t1, t2].
std::vector<ChordLabel> recognize_chords(const audio::WaveformClip& clip, double t1, double t2);

/// Beats by comb-filter phase selection and local peak picking around the
/// estimated period; downbeat phase maximizes summed onset strength.
BeatGrid track_downbeats(const audio::WaveformClip& clip, int meter = 4);

} // namespace omk::mir
