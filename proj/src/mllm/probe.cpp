#include <algorithm>
#include <cmath>

#include "omk/error.hpp"
#include "omk/mllm.hpp"
#include "omk/mir.hpp"
#include "omk/rng.hpp"
#include "omk/synth.hpp"

namespace omk::mllm {

namespace {

constexpr const char* kPrompt = "Describe the music.";

double option_log_likelihood(const TinyModel& model, const Matrix& encoded, const std::string& prompt,
                             const std::string& option, kernels::Exec exec) {
  auto& m = const_cast<TinyModel&>(model);
  const auto [loss, count] = m.loss(encoded, make_sequence(prompt, option), false, exec);
  (void)count;
  return -loss;
}

} // namespace

ModelConfig toy_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.encoder_dim = 64;
  c.max_context = 256;
  c.seed = seed;
  return c;
}

audio::TokenGrid clip_tokens(const audio::WaveformClip& clip, std::size_t pool_factor) {
  const auto mel = audio::normalize_mel(audio::mel_spectrogram(clip));
  return audio::mean_pool_tokens(audio::patchify(mel), {pool_factor});
}

std::vector<Example> toy_dataset(const ToyOptions& opt) {
  if (opt.n_examples == 0) {
    throw Error("toy dataset needs at least one example");
  }
  std::vector<Example> out;
  out.reserve(opt.n_examples);
  for (std::size_t i = 0; i < opt.n_examples; ++i) {
    audio::WaveformClip clip;
    std::string target;
    const std::uint64_t seed = opt.seed * 1000003u + i;
    if (i < 24) {
      const int root = static_cast<int>(i % 12);
      const bool minor = i >= 12;
      clip = synth::triad(48 + root, minor, audio::kClipSeconds, 0.002, seed);
      target = mir::pitch_class_name(root) + std::string(minor ? " minor" : " major") + " chord";
    } else {
      const double bpm = 60.0 + 10.0 * static_cast<double>(i - 24);
      synth::ClickTrackSpec spec;
      spec.bpm = bpm;
      spec.seed = seed;
      spec.noise = 0.002;
      clip = synth::click_track(spec);
      target = "clicks at " + std::to_string(static_cast<int>(bpm)) + " bpm";
    }
    out.push_back({clip_tokens(clip, opt.pool_factor), kPrompt, target});
  }
  return out;
}

std::vector<ProbeItem> make_probe(const std::vector<Example>& data, std::uint64_t seed) {
  if (data.size() < 4) {
    throw Error("probe needs at least four examples");
  }
  Rng rng(seed);
  std::vector<ProbeItem> items;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j != i && data[j].target != data[i].target) {
        others.push_back(j);
      }
    }
    if (others.size() < 3) {
      throw Error("probe needs at least four distinct targets");
    }
    const auto perm = shuffled_indices(others.size(), rng);
    std::vector<std::string> options{data[i].target, data[others[perm[0]]].target, data[others[perm[1]]].target,
                                     data[others[perm[2]]].target};
    const auto gold = static_cast<std::size_t>(rng.below(4));
    std::swap(options[0], options[gold]);
    items.push_back({data[i].music, data[i].prompt, options, gold});
  }
  return items;
}

std::size_t choose_option(const TinyModel& model, const ProbeItem& item, kernels::Exec exec) {
  const auto encoded = model.encode(item.music);
  std::size_t best = 0;
  double best_ll = -1e300;
  for (std::size_t k = 0; k < item.options.size(); ++k) {
    const double ll = option_log_likelihood(model, encoded, item.prompt, item.options[k], exec);
    if (ll > best_ll) {
      best_ll = ll;
      best = k;
    }
  }
  return best;
}

double probe_accuracy(const TinyModel& model, const std::vector<ProbeItem>& items, kernels::Exec exec) {
  if (items.empty()) {
    throw Error("probe_accuracy: no items");
  }
  std::size_t hits = 0;
  for (const auto& item : items) {
    hits += choose_option(model, item, exec) == item.gold ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

AblationResult white_noise_ablation(const TinyModel& model, const std::vector<ProbeItem>& items,
                                    std::size_t pool_factor, std::uint64_t seed, kernels::Exec exec) {
  AblationResult r;
  r.true_accuracy = probe_accuracy(model, items, exec);
  auto noisy = items;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    noisy[i].music = clip_tokens(audio::white_noise_clip(audio::kClipSeconds, seed + i), pool_factor);
  }
  r.noise_accuracy = probe_accuracy(model, noisy, exec);
  return r;
}

} // namespace omk::mllm
