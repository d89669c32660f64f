#include <algorithm>
#include <cmath>

#include "omk/error.hpp"
#include "omk/mir.hpp"

namespace omk::mir {

namespace {

constexpr double kMedianSeconds = 0.5;
constexpr double kMinSegmentSeconds = 0.3;
constexpr double kSilenceFloor = 1e-10;

struct Segment {
  int label; // root*2 + (minor ? 1 : 0)
  std::size_t first;
  std::size_t count;
};

// Cosine similarity against binary triad templates; -1 for a silent frame.
int classify(const std::array<double, 12>& chroma) {
  double norm = 0.0;
  for (double c : chroma) {
    norm += c * c;
  }
  if (norm <= kSilenceFloor * kSilenceFloor) {
    return -1;
  }
  int best = 0;
  double best_score = -1.0;
  for (int root = 0; root < 12; ++root) {
    for (int minor = 0; minor < 2; ++minor) {
      const int third = minor ? 3 : 4;
      const double s = chroma[static_cast<std::size_t>(root)] + chroma[static_cast<std::size_t>((root + third) % 12)] +
                       chroma[static_cast<std::size_t>((root + 7) % 12)];
      if (s > best_score) {
        best_score = s;
        best = root * 2 + minor;
      }
    }
  }
  return best;
}

} // namespace

std::vector<ChordLabel> recognize_chords(const audio::WaveformClip& clip, double t1, double t2) {
  if (t1 == t2) {
    throw Error("empty analysis window");
  }
  if (!(t1 >= 0.0 && t1 < t2 && t2 <= clip.duration() + 1e-9)) {
    throw Error("invalid analysis window [" + std::to_string(t1) + ", " + std::to_string(t2) + "]");
  }
  const auto chroma = chromagram(clip);
  const double fps = chroma.frame_rate;
  auto first = static_cast<std::size_t>(std::ceil(t1 * fps - 1e-9));
  auto last = static_cast<std::size_t>(std::ceil(t2 * fps - 1e-9)); // exclusive
  last = std::min(last, chroma.frames.size());
  if (last <= first) {
    first = std::min(static_cast<std::size_t>(std::lround(t1 * fps)), chroma.frames.size() - 1);
    last = first + 1;
  }
  const std::size_t n = last - first;

  // Median filter each pitch class over the window.
  const auto half = static_cast<std::size_t>(std::lround(kMedianSeconds * fps / 2.0));
  std::vector<std::array<double, 12>> smooth(n);
  std::vector<double> buf;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    for (std::size_t pc = 0; pc < 12; ++pc) {
      buf.clear();
      for (std::size_t k = lo; k < hi; ++k) {
        buf.push_back(chroma.frames[first + k][pc]);
      }
      std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2), buf.end());
      smooth[i][pc] = buf[buf.size() / 2];
    }
  }

  double peak = 0.0;
  for (const auto& f : smooth) {
    for (double c : f) {
      peak = std::max(peak, c);
    }
  }
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (double c : smooth[i]) {
      e += c;
    }
    labels[i] = e > 1e-6 * peak ? classify(smooth[i]) : -1;
  }
  if (std::all_of(labels.begin(), labels.end(), [](int l) { return l < 0; }) || peak <= 0.0) {
    throw Error("silent analysis window");
  }
  // Silent frames take the label of the nearest preceding (else following) frame.
  int carry = -1;
  for (int& l : labels) {
    l = l >= 0 ? (carry = l) : carry;
  }
  carry = -1;
  for (std::size_t i = n; i-- > 0;) {
    labels[i] = labels[i] >= 0 ? (carry = labels[i]) : carry;
  }

  std::vector<Segment> segs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!segs.empty() && segs.back().label == labels[i]) {
      ++segs.back().count;
    } else {
      segs.push_back({labels[i], i, 1});
    }
  }
  const auto min_frames = static_cast<std::size_t>(std::ceil(kMinSegmentSeconds * fps - 1e-9));
  while (segs.size() > 1) {
    auto shortest = std::min_element(segs.begin(), segs.end(),
                                     [](const Segment& a, const Segment& b) { return a.count < b.count; });
    if (shortest->count >= min_frames) {
      break;
    }
    // Absorb into the longer neighbour (the previous one on ties).
    auto idx = static_cast<std::size_t>(shortest - segs.begin());
    std::size_t into;
    if (idx == 0) {
      into = 1;
    } else if (idx + 1 == segs.size()) {
      into = idx - 1;
    } else {
      into = segs[idx - 1].count >= segs[idx + 1].count ? idx - 1 : idx + 1;
    }
    segs[into].count += segs[idx].count;
    segs[into].first = std::min(segs[into].first, segs[idx].first);
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(idx));
    // Re-merge neighbours that now carry the same label.
    for (std::size_t k = 1; k < segs.size();) {
      if (segs[k].label == segs[k - 1].label) {
        segs[k - 1].count += segs[k].count;
        segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        ++k;
      }
    }
  }

  std::vector<ChordLabel> out;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    ChordLabel c;
    c.root = segs[k].label / 2;
    c.quality = segs[k].label % 2 ? Mode::minor : Mode::major;
    c.start = k == 0 ? t1 : out.back().end;
    c.end = k + 1 == segs.size() ? t2 : std::clamp(static_cast<double>(first + segs[k + 1].first) / fps, t1, t2);
    out.push_back(c);
  }
  return out;
}

} // namespace omk::mir
