#include <algorithm>
#include <cmath>
#include <numbers>

#include "omk/error.hpp"
#include "omk/mllm.hpp"
#include "omk/rng.hpp"

namespace omk::mllm {

std::string_view to_string(Stage s) {
  switch (s) {
  case Stage::stage1:
    return "stage1";
  case Stage::stage2:
    return "stage2";
  case Stage::lyrics:
    return "lyrics";
  case Stage::tools:
    return "tools";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : {Stage::stage1, Stage::stage2, Stage::lyrics, Stage::tools}) {
    if (to_string(st) == s) {
      return st;
    }
  }
  return std::nullopt;
}

std::size_t default_epochs(Stage s) {
  switch (s) {
  case Stage::stage1:
    return 15;
  case Stage::stage2:
    return 10;
  case Stage::lyrics:
    return 20;
  case Stage::tools:
    return 5;
  }
  return 1;
}

double default_learning_rate(Stage s) { return s == Stage::stage1 ? 1e-3 : 2e-5; }

TrainConfig TrainConfig::for_stage(Stage s) {
  TrainConfig c;
  c.stage = s;
  c.epochs = default_epochs(s);
  c.learning_rate = default_learning_rate(s);
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0 && max_steps == 0) {
    throw Error("training needs epochs > 0 or max_steps > 0");
  }
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw Error("warmup_fraction must lie in (0, 1)");
  }
  if (batch_size == 0 || !(learning_rate > 0.0)) {
    throw Error("batch_size and learning_rate must be positive");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"stage", to_string(stage)},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"learning_rate", learning_rate},
          {"warmup_fraction", warmup_fraction},
          {"batch_size", batch_size},
          {"seed", seed},
          {"optimizer", {{"name", "adam"}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"weight_decay", 0.0}}},
          {"grad_clip", grad_clip}};
}

double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  const auto warmup = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps))));
  if (step < warmup) {
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(std::max<std::size_t>(total_steps - warmup, 1));
  const double progress = static_cast<double>(step - warmup) / span;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

// Shared optimization loop over the currently trainable parameters.
std::vector<LogEntry> optimize(TinyModel& model, const std::vector<Matrix>& encoded, const std::vector<Sequence>& seqs,
                               const TrainConfig& cfg) {
  const std::size_t n = seqs.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t per_epoch = (n + batch - 1) / batch;
  const std::size_t total = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * per_epoch;

  auto& params = model.params();
  std::vector<std::vector<double>> m(params.size()), v(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].trainable) {
      m[i].assign(params[i].value.size(), 0.0);
      v[i].assign(params[i].value.size(), 0.0);
    }
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order;
  std::size_t cursor = n;
  std::vector<LogEntry> log;
  log.reserve(total);
  for (std::size_t step = 0; step < total; ++step) {
    model.zero_grad();
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        order = shuffled_indices(n, rng);
        cursor = 0;
      }
      const auto i = order[cursor++];
      const auto [l, c] = model.loss(encoded[i], seqs[i], true, cfg.exec);
      loss_sum += l;
      count += c;
    }
    if (count == 0) {
      throw Error("training batch has no supervised tokens");
    }
    const double inv = 1.0 / static_cast<double>(count);
    double norm2 = 0.0;
    for (auto& p : params) {
      if (!p.trainable) {
        continue;
      }
      for (auto& g : p.grad) {
        g *= inv;
        norm2 += g * g;
      }
    }
    const double norm = std::sqrt(norm2);
    const double clip = cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;

    const double lr = learning_rate_at(step, total, cfg);
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      if (!p.trainable) {
        continue;
      }
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j] * clip;
        m[k][j] = cfg.beta1 * m[k][j] + (1.0 - cfg.beta1) * g;
        v[k][j] = cfg.beta2 * v[k][j] + (1.0 - cfg.beta2) * g * g;
        p.value[j] -= lr * (m[k][j] / c1) / (std::sqrt(v[k][j] / c2) + cfg.eps);
      }
    }
    log.push_back({step + 1, lr, loss_sum * inv});
  }
  model.zero_grad();
  return log;
}

} // namespace

std::vector<LogEntry> train_stage(TinyModel& model, const std::vector<Example>& data, const TrainConfig& cfg) {
  if (data.empty()) {
    throw Error("train_stage: empty training data");
  }
  cfg.validate();
  if (cfg.stage == Stage::stage1) {
    model.set_trainable({Group::projector});
  } else {
    if (!model.has_lora()) {
      throw Error("train_stage: " + std::string(to_string(cfg.stage)) + " trains LoRA adapters, none are attached");
    }
    model.set_trainable({Group::projector, Group::lora});
  }
  std::vector<Matrix> encoded;
  std::vector<Sequence> seqs;
  for (const auto& ex : data) {
    encoded.push_back(model.encode(ex.music));
    seqs.push_back(make_sequence(ex.prompt, ex.target));
  }
  auto log = optimize(model, encoded, seqs, cfg);
  model.set_trainable({});
  return log;
}

std::vector<LogEntry> pretrain_base(TinyModel& model, const std::vector<std::pair<std::string, std::string>>& texts,
                                    const TrainConfig& cfg) {
  if (texts.empty()) {
    throw Error("pretrain_base: empty corpus");
  }
  cfg.validate();
  if (model.has_lora()) {
    throw Error("pretrain_base: pretrain before attaching LoRA adapters");
  }
  model.set_trainable({Group::base});
  // The encoder stub only feeds the prefix, which pretraining never sees.
  model.param("enc.w").trainable = false;
  const Matrix none(0, model.config().encoder_dim);
  std::vector<Matrix> encoded(texts.size(), none);
  std::vector<Sequence> seqs;
  for (const auto& [prompt, target] : texts) {
    seqs.push_back(make_sequence(prompt, target));
  }
  auto log = optimize(model, encoded, seqs, cfg);
  model.set_trainable({});
  return log;
}

double dataset_loss(const TinyModel& model, const std::vector<Example>& data, kernels::Exec exec) {
  double total = 0.0;
  std::size_t count = 0;
  // Forward-only: loss() leaves the model untouched without backward.
  auto& m = const_cast<TinyModel&>(model);
  for (const auto& ex : data) {
    const auto [l, c] = m.loss(model.encode(ex.music), make_sequence(ex.prompt, ex.target), false, exec);
    total += l;
    count += c;
  }
  if (count == 0) {
    throw Error("dataset_loss: no supervised tokens");
  }
  return total / static_cast<double>(count);
}

std::string log_to_jsonl(const std::vector<LogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    out += nlohmann::json{{"step", e.step}, {"lr", e.lr}, {"loss", e.loss}}.dump();
    out += '\n';
  }
  return out;
}

} // namespace omk::mllm
