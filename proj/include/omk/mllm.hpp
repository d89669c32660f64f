#pragma once

// Tiny multimodal decoder: frozen encoder stub -> GELU projector -> music
// prefix for a byte-level pre-LN transformer, with LoRA on the attention
// projections and a two-stage training discipline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "omk/audio.hpp"
#include "omk/kernels.hpp"

namespace omk::mllm {

inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr std::size_t kVocab = 258;

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

double gelu(double x);
double gelu_grad(double x);

// Projector

struct ProjectorParams {
  Matrix w1; // hidden x encoder_dim
  std::vector<double> b1;
  Matrix w2; // d_model x hidden
  std::vector<double> b2;
};

/// Row-wise W2 * GELU(W1 x + b1) + b2. `tokens` is n x encoder_dim.
Matrix project(const Matrix& tokens, const ProjectorParams& p);

// LoRA

struct LoraConfig {
  std::size_t rank = 16;
  double alpha = 128.0;
};

struct LoraParams {
  Matrix a; // r x k
  Matrix b; // d x r
  double alpha = 128.0;

  std::size_t rank() const { return a.rows; }
  double scale() const { return alpha / static_cast<double>(a.rows); }
};

/// A ~ U(-1/sqrt(k), 1/sqrt(k)) * 0.01, B = 0.
LoraParams init_lora(std::size_t d, std::size_t k, const LoraConfig& cfg, std::uint64_t seed);

/// W x + (alpha/r) B (A x), W untouched.
std::vector<double> lora_forward(const Matrix& w, const LoraParams& lora, std::span<const double> x);
/// W + (alpha/r) B A.
Matrix merge_lora(const Matrix& w, const LoraParams& lora);

// Model

struct ModelConfig {
  std::size_t vocab_size = kVocab;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_context = 2048;
  std::size_t encoder_dim = 768;
  std::size_t patch_dim = audio::kPatchDim;
  std::size_t projector_hidden = 0; // 0: 4 * d_model
  std::uint64_t seed = 0;
  // Initialization scales (standard deviations).
  double embed_std = 0.02;
  double attn_std = 0.0; // 0: 1/sqrt(d_model)
  double mlp_std = 0.0;  // 0: 1/sqrt(fan_in)
  double head_std = 0.0; // 0: 1/sqrt(d_model)

  std::size_t hidden() const { return projector_hidden == 0 ? 4 * d_model : projector_hidden; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

enum class Group { base, projector, lora };
std::string_view to_string(Group g);

struct Param {
  std::string name;
  Group group = Group::base;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = false;
};

/// A text sequence conditioned on a music prefix. `tokens` holds the text
/// ids; `loss_mask[i]` marks positions whose next token is supervised.
struct Sequence {
  std::vector<int> tokens;
  std::vector<bool> loss_mask;
};

/// [BOS] prompt target [EOS], with only the target bytes and EOS supervised.
Sequence make_sequence(std::string_view prompt, std::string_view target);
std::vector<int> encode_bytes(std::string_view text);
std::string decode_bytes(std::span<const int> ids);

class TinyModel {
public:
  explicit TinyModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param& param(std::string_view name);
  const Param& param(std::string_view name) const;
  bool has_param(std::string_view name) const;

  /// Adds zero-initialized adapters to every attention projection.
  void attach_lora(const LoraConfig& cfg, std::uint64_t seed);
  bool has_lora() const { return lora_.has_value(); }
  const std::optional<LoraConfig>& lora_config() const { return lora_; }
  /// Copy with adapters folded into the base weights and removed.
  TinyModel merged() const;

  /// FNV-1a over the raw bytes of every parameter in the group, in order.
  std::uint64_t group_hash(Group g) const;
  std::size_t group_size(Group g) const;
  void set_trainable(std::initializer_list<Group> groups);
  void zero_grad();

  ProjectorParams projector() const;

  /// Frozen linear patch embedding: n x patch_dim -> n x encoder_dim.
  Matrix encode(const audio::TokenGrid& grid) const;
  /// Projected prefix: n x d_model.
  Matrix prefix(const Matrix& encoded) const;

  /// Logits over text positions: text length x vocab.
  Matrix forward(const Matrix& encoded, std::span<const int> text,
                 kernels::Exec exec = kernels::Exec::serial) const;
  Matrix forward(const audio::TokenGrid& grid, std::span<const int> text,
                 kernels::Exec exec = kernels::Exec::serial) const;

  /// Summed cross-entropy over masked positions; accumulates gradients of
  /// trainable parameters when `backward` is set. Returns (loss sum, count).
  std::pair<double, std::size_t> loss(const Matrix& encoded, const Sequence& seq, bool backward,
                                      kernels::Exec exec = kernels::Exec::serial);

  /// Argmax continuation until EOS or max_new tokens.
  std::vector<int> greedy_decode(const Matrix& encoded, std::span<const int> prompt, std::size_t max_new,
                                 kernels::Exec exec = kernels::Exec::serial) const;

private:
  struct Forward;
  void run(const Matrix& encoded, std::span<const int> text, Forward& f, kernels::Exec exec) const;
  void add_param(std::string name, Group g, std::size_t rows, std::size_t cols);
  std::size_t index(std::string_view name) const;

  ModelConfig cfg_;
  std::optional<LoraConfig> lora_;
  std::vector<Param> params_;
};

// Training

enum class Stage { stage1, stage2, lyrics, tools };
std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);
std::size_t default_epochs(Stage s);
double default_learning_rate(Stage s);

struct TrainConfig {
  Stage stage = Stage::stage1;
  std::size_t epochs = 15;
  std::size_t max_steps = 0; // 0: epochs * ceil(N / batch_size); otherwise overrides
  double learning_rate = 1e-3;
  double warmup_fraction = 0.3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0; // global norm; 0 disables
  kernels::Exec exec = kernels::Exec::serial;

  static TrainConfig for_stage(Stage s);
  void validate() const;
  nlohmann::json to_json() const;
};

/// Warmup then cosine decay to zero.
double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct Example {
  audio::TokenGrid music;
  std::string prompt;
  std::string target;
};

struct LogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Stage 1 trains the projector; every later stage trains projector + LoRA
/// (adapters must be attached).
std::vector<LogEntry> train_stage(TinyModel& model, const std::vector<Example>& data, const TrainConfig& cfg);

/// Language-model pretraining of the base group on text alone (no music
/// prefix). Stands in for the pretrained LLM the stages start from.
std::vector<LogEntry> pretrain_base(TinyModel& model, const std::vector<std::pair<std::string, std::string>>& texts,
                                    const TrainConfig& cfg);

/// Mean cross-entropy per supervised token over a dataset.
double dataset_loss(const TinyModel& model, const std::vector<Example>& data,
                    kernels::Exec exec = kernels::Exec::serial);

std::string log_to_jsonl(const std::vector<LogEntry>& log);

// Checkpoints: <dir>/manifest.json + <dir>/tensors.bin (LE float32).

void save_checkpoint(const TinyModel& model, const std::filesystem::path& dir, const nlohmann::json& extra = {});
TinyModel load_checkpoint(const std::filesystem::path& dir);

// Toy data and probes

struct ToyOptions {
  std::size_t n_examples = 32;
  std::size_t pool_factor = 16;
  std::uint64_t seed = 0;
};

/// Synthetic clips (triads and click tracks) paired with short descriptions,
/// each prompt identical so the answer depends on the music alone.
std::vector<Example> toy_dataset(const ToyOptions& opt);
/// Small preset used by the toy training runs.
ModelConfig toy_model_config(std::uint64_t seed = 0);
/// Turns a clip into pooled tokens.
audio::TokenGrid clip_tokens(const audio::WaveformClip& clip, std::size_t pool_factor);

struct ProbeItem {
  audio::TokenGrid music;
  std::string prompt;
  std::vector<std::string> options;
  std::size_t gold = 0;
};

/// One four-option item per example: the gold target plus three other
/// targets from the set, in seeded order.
std::vector<ProbeItem> make_probe(const std::vector<Example>& data, std::uint64_t seed);

/// Option with the highest total log-likelihood given music + prompt.
std::size_t choose_option(const TinyModel& model, const ProbeItem& item,
                          kernels::Exec exec = kernels::Exec::serial);
double probe_accuracy(const TinyModel& model, const std::vector<ProbeItem>& items,
                      kernels::Exec exec = kernels::Exec::serial);

struct AblationResult {
  double true_accuracy = 0.0;
  double noise_accuracy = 0.0;
};

/// Probe accuracy with the true clips versus white-noise clips in their place.
AblationResult white_noise_ablation(const TinyModel& model, const std::vector<ProbeItem>& items,
                                    std::size_t pool_factor, std::uint64_t seed,
                                    kernels::Exec exec = kernels::Exec::serial);

} // namespace omk::mllm
