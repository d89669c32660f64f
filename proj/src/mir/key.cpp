#include <cmath>

#include "omk/error.hpp"
#include "omk/mir.hpp"

namespace omk::mir {

const KeyProfiles& krumhansl_profiles() {
  static const KeyProfiles profiles{
      {6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88},
      {6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17},
  };
  return profiles;
}

namespace {

double pearson(const std::array<double, 12>& a, const std::array<double, 12>& b) {
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= 12.0;
  mb /= 12.0;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    return 0.0;
  }
  return sab / std::sqrt(saa * sbb);
}

std::array<double, 12> rotate(const std::array<double, 12>& profile, int tonic) {
  std::array<double, 12> out{};
  for (int i = 0; i < 12; ++i) {
    out[static_cast<std::size_t>((i + tonic) % 12)] = profile[static_cast<std::size_t>(i)];
  }
  return out;
}

} // namespace

KeyLabel key_from_chroma(const std::array<double, 12>& chroma, const KeyProfiles& profiles) {
  double energy = 0.0;
  for (double c : chroma) {
    energy += c;
  }
  if (!(energy > 0.0)) {
    throw Error("detect_key: silent input");
  }
  KeyLabel best;
  double best_r = -std::numeric_limits<double>::infinity();
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (Mode mode : {Mode::major, Mode::minor}) {
      const auto& p = mode == Mode::major ? profiles.major : profiles.minor;
      const double r = pearson(chroma, rotate(p, tonic));
      if (r > best_r) {
        best_r = r;
        best = {tonic, mode};
      }
    }
  }
  return best;
}

KeyLabel detect_key(const audio::WaveformClip& clip, const KeyProfiles& profiles) {
  const auto chroma = chromagram(clip);
  std::array<double, 12> mean{};
  for (const auto& f : chroma.frames) {
    for (std::size_t i = 0; i < 12; ++i) {
      mean[i] += f[i];
    }
  }
  double energy = 0.0;
  for (double& m : mean) {
    m /= static_cast<double>(std::max<std::size_t>(chroma.frames.size(), 1));
    energy += m;
  }
  if (energy < 1e-9) {
    throw Error("detect_key: silent input");
  }
  return key_from_chroma(mean, profiles);
}

} // namespace omk::mir
