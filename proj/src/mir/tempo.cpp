#include <algorithm>
#include <cmath>
#include <limits>

#include "omk/error.hpp"
#include "omk/mir.hpp"

namespace omk::mir {

namespace {

constexpr double kMinBpm = 40.0;
constexpr double kMaxBpm = 240.0;
constexpr double kMinActiveSeconds = 5.0;
constexpr double kMinFlux = 1e-6;
constexpr int kMaxMultiples = 8;

// Unbiased autocorrelation of the mean-removed envelope at integer lag.
double acf(const std::vector<double>& x, std::size_t lag) {
  if (lag >= x.size()) {
    return 0.0;
  }
  double s = 0.0;
  for (std::size_t n = 0; n + lag < x.size(); ++n) {
    s += x[n] * x[n + lag];
  }
  return s / static_cast<double>(x.size() - lag);
}

// Vertex of the parabola through (lag-1, lag, lag+1).
double parabolic_peak(const std::vector<double>& x, std::size_t lag) {
  const double a = acf(x, lag - 1);
  const double b = acf(x, lag);
  const double c = acf(x, lag + 1);
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) {
    return static_cast<double>(lag);
  }
  const double shift = 0.5 * (a - c) / denom;
  return static_cast<double>(lag) + std::clamp(shift, -0.5, 0.5);
}

} // namespace

double estimate_tempo(const OnsetEnvelope& env) {
  const auto& v = env.values;
  double total = 0.0;
  std::size_t first_active = v.size();
  std::size_t last_active = 0;
  double peak = 0.0;
  for (double x : v) {
    peak = std::max(peak, x);
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    total += v[i];
    if (v[i] > 0.1 * peak && peak > 0.0) {
      first_active = std::min(first_active, i);
      last_active = i;
    }
  }
  const double active_seconds =
      first_active < v.size() ? static_cast<double>(last_active - first_active) / env.frame_rate : 0.0;
  if (total < kMinFlux || active_seconds < kMinActiveSeconds) {
    throw Error("insufficient onset energy");
  }

  double mean = total / static_cast<double>(v.size());
  std::vector<double> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    x[i] = v[i] - mean;
  }

  const auto min_lag = static_cast<std::size_t>(std::floor(60.0 * env.frame_rate / kMaxBpm));
  const auto max_lag = static_cast<std::size_t>(std::ceil(60.0 * env.frame_rate / kMinBpm));
  std::size_t best_lag = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t lag = std::max<std::size_t>(min_lag, 2); lag <= max_lag && lag + 1 < x.size(); ++lag) {
    const double r = acf(x, lag);
    // Local maxima only, weighted by 1/lag against sub-octave errors.
    if (r < acf(x, lag - 1) || r < acf(x, lag + 1)) {
      continue;
    }
    const double score = r / static_cast<double>(lag);
    if (score > best_score) {
      best_score = score;
      best_lag = lag;
    }
  }
  if (best_lag == 0 || best_score <= 0.0) {
    throw Error("insufficient onset energy");
  }

  // Refine the period from the peaks at integer multiples of the best lag.
  double num = 0.0;
  double den = 0.0;
  const double base = parabolic_peak(x, best_lag);
  for (int k = 1; k <= kMaxMultiples; ++k) {
    const double expect = base * k;
    const auto centre = static_cast<std::size_t>(std::lround(expect));
    if (centre + 2 >= x.size() / 2) {
      break;
    }
    std::size_t l = centre;
    for (std::size_t c = centre - 1; c <= centre + 1; ++c) {
      if (acf(x, c) > acf(x, l)) {
        l = c;
      }
    }
    if (acf(x, l) <= 0.0) {
      break;
    }
    num += k * parabolic_peak(x, l);
    den += static_cast<double>(k) * k;
  }
  const double period = den > 0.0 ? num / den : base;
  const double bpm = 60.0 * env.frame_rate / period;
  return std::round(bpm * 10.0) / 10.0;
}

double estimate_tempo(const audio::WaveformClip& clip) { return estimate_tempo(onset_envelope(clip)); }

} // namespace omk::mir
