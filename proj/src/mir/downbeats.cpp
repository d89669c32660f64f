#include <algorithm>
#include <cmath>

#include "omk/error.hpp"
#include "omk/mir.hpp"

namespace omk::mir {

namespace {

constexpr double kSearchFraction = 0.15;   // peak search half-width, fraction of a period
constexpr double kConfidenceRatio = 1.05;  // best/second-best downbeat phase strength

double linear_at(const std::vector<double>& v, double pos) {
  if (pos < 0.0 || pos > static_cast<double>(v.size() - 1)) {
    return 0.0;
  }
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  const double next = i + 1 < v.size() ? v[i + 1] : v[i];
  return v[i] * (1.0 - frac) + next * frac;
}

// Index of the largest envelope value in [lo, hi], refined parabolically.
double local_peak(const std::vector<double>& v, long lo, long hi) {
  lo = std::max(lo, 0L);
  hi = std::min(hi, static_cast<long>(v.size()) - 1);
  long best = lo;
  for (long i = lo; i <= hi; ++i) {
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  if (best <= 0 || best + 1 >= static_cast<long>(v.size())) {
    return static_cast<double>(best);
  }
  const double a = v[static_cast<std::size_t>(best - 1)];
  const double b = v[static_cast<std::size_t>(best)];
  const double c = v[static_cast<std::size_t>(best + 1)];
  const double denom = a - 2.0 * b + c;
  return denom < 0.0 ? static_cast<double>(best) + std::clamp(0.5 * (a - c) / denom, -0.5, 0.5)
                     : static_cast<double>(best);
}

} // namespace

BeatGrid track_downbeats(const audio::WaveformClip& clip, int meter) {
  if (meter < 1) {
    throw Error("track_downbeats: meter must be positive");
  }
  const auto env = onset_envelope(clip);
  const double bpm = estimate_tempo(env);
  const auto& v = env.values;
  const double period = 60.0 * env.frame_rate / bpm;
  const auto n = static_cast<double>(v.size());

  // Comb filter: the phase whose pulse train collects the most onset strength.
  double best_phase = 0.0;
  double best_sum = -1.0;
  for (double phase = 0.0; phase < period; phase += 1.0) {
    double sum = 0.0;
    for (double t = phase; t < n; t += period) {
      sum += linear_at(v, t);
    }
    if (sum > best_sum) {
      best_sum = sum;
      best_phase = phase;
    }
  }

  // Follow the pulse train, snapping each beat to the local onset peak.
  const auto radius = static_cast<long>(std::ceil(kSearchFraction * period));
  double peak_env = 0.0;
  for (double x : v) {
    peak_env = std::max(peak_env, x);
  }
  std::vector<double> beats;
  std::vector<double> strength;
  double expected = best_phase;
  while (expected < n - 1.0) {
    const auto centre = std::lround(expected);
    double pos = local_peak(v, centre - radius, centre + radius);
    const double s = linear_at(v, pos);
    if (s < 0.05 * peak_env) {
      pos = expected; // no onset nearby; keep the grid position
    }
    if (beats.empty() || pos > beats.back() * env.frame_rate + 0.5) {
      beats.push_back(pos / env.frame_rate);
      strength.push_back(linear_at(v, pos));
    }
    expected = pos + period;
  }

  BeatGrid grid;
  grid.meter = meter;
  grid.beat_times = beats;
  if (beats.empty()) {
    throw Error("track_downbeats: no beats found");
  }
  const auto m = static_cast<std::size_t>(meter);
  std::vector<double> phase_strength(m, 0.0);
  std::vector<std::size_t> phase_count(m, 0);
  for (std::size_t i = 0; i < strength.size(); ++i) {
    phase_strength[i % m] += strength[i];
    ++phase_count[i % m];
  }
  for (std::size_t p = 0; p < m; ++p) {
    phase_strength[p] /= static_cast<double>(std::max<std::size_t>(phase_count[p], 1));
  }
  std::size_t best = 0;
  for (std::size_t p = 1; p < m; ++p) {
    if (phase_strength[p] > phase_strength[best]) {
      best = p;
    }
  }
  double second = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    if (p != best) {
      second = std::max(second, phase_strength[p]);
    }
  }
  grid.low_confidence = m > 1 && phase_strength[best] < kConfidenceRatio * second;
  for (std::size_t i = best; i < beats.size(); i += m) {
    grid.downbeat_times.push_back(beats[i]);
  }
  return grid;
}

} // namespace omk::mir
