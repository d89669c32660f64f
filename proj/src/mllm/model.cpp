#include <algorithm>
#include <cmath>
#include <cstring>

#include "omk/error.hpp"
#include "omk/mllm.hpp"
#include "omk/rng.hpp"

namespace omk::mllm {

namespace {

constexpr double kLnEps = 1e-5;
constexpr const char* kAttn[4] = {"q", "k", "v", "o"};

std::string layer_name(std::size_t l, std::string_view rest) { return "l" + std::to_string(l) + "." + std::string(rest); }

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

void layer_norm(const Matrix& x, std::span<const double> g, std::span<const double> b, Matrix& y,
                LayerNormCache& c) {
  const std::size_t n = x.rows, d = x.cols;
  y = Matrix(n, d);
  c.xhat = Matrix(n, d);
  c.rstd.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      mean += x.at(i, j);
    }
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = x.at(i, j) - mean;
      var += t * t;
    }
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    c.rstd[i] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (x.at(i, j) - mean) * rstd;
      c.xhat.at(i, j) = xh;
      y.at(i, j) = xh * g[j] + b[j];
    }
  }
}

// dx += LN'(dy); accumulates dg, db when given.
void layer_norm_backward(const Matrix& dy, const LayerNormCache& c, std::span<const double> g, Matrix& dx,
                         double* dg, double* db) {
  const std::size_t n = dy.rows, d = dy.cols;
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dxhat[j] = dy.at(i, j) * g[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * c.xhat.at(i, j);
      if (dg != nullptr) {
        dg[j] += dy.at(i, j) * c.xhat.at(i, j);
      }
      if (db != nullptr) {
        db[j] += dy.at(i, j);
      }
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx.at(i, j) += c.rstd[i] * (dxhat[j] - mean_dxhat - c.xhat.at(i, j) * mean_dxhat_xhat);
    }
  }
}

void add_bias(Matrix& y, std::span<const double> b) {
  for (std::size_t i = 0; i < y.rows; ++i) {
    for (std::size_t j = 0; j < y.cols; ++j) {
      y.at(i, j) += b[j];
    }
  }
}

void bias_grad(const Matrix& dy, std::vector<double>& db) {
  for (std::size_t i = 0; i < dy.rows; ++i) {
    for (std::size_t j = 0; j < dy.cols; ++j) {
      db[j] += dy.at(i, j);
    }
  }
}

} // namespace

// Activations kept for the backward pass.
struct TinyModel::Forward {
  std::size_t P = 0, T = 0, S = 0;
  Matrix encoded, f1, a1; // projector
  Matrix x0;
  struct Layer {
    Matrix x_in, h1, q, k, v, ctx, x_mid, h2, fc, act;
    Matrix u[4]; // LoRA A-projections
    LayerNormCache ln1, ln2;
    std::vector<double> probs; // heads x S x S
  };
  std::vector<Layer> layers;
  Matrix x_final, h_final;
  LayerNormCache ln_f;
  Matrix logits;
};

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw Error("d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0 || vocab_size < kVocab || encoder_dim == 0 || patch_dim == 0 || max_context == 0) {
    throw Error("invalid model configuration");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},   {"d_model", d_model},         {"n_layers", n_layers},
          {"n_heads", n_heads},         {"max_context", max_context}, {"encoder_dim", encoder_dim},
          {"patch_dim", patch_dim},     {"projector_hidden", hidden()}, {"seed", seed},
          {"embed_std", embed_std},     {"attn_std", attn_std},       {"mlp_std", mlp_std},
          {"head_std", head_std}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.max_context = j.value("max_context", c.max_context);
  c.encoder_dim = j.value("encoder_dim", c.encoder_dim);
  c.patch_dim = j.value("patch_dim", c.patch_dim);
  c.projector_hidden = j.value("projector_hidden", c.projector_hidden);
  c.seed = j.value("seed", c.seed);
  c.embed_std = j.value("embed_std", c.embed_std);
  c.attn_std = j.value("attn_std", c.attn_std);
  c.mlp_std = j.value("mlp_std", c.mlp_std);
  c.head_std = j.value("head_std", c.head_std);
  c.validate();
  return c;
}

std::string_view to_string(Group g) {
  switch (g) {
  case Group::base:
    return "base";
  case Group::projector:
    return "projector";
  case Group::lora:
    return "lora";
  }
  return "unknown";
}

void TinyModel::add_param(std::string name, Group g, std::size_t rows, std::size_t cols) {
  Param p;
  p.name = std::move(name);
  p.group = g;
  p.rows = rows;
  p.cols = cols;
  p.value.assign(rows * cols, 0.0);
  p.grad.assign(rows * cols, 0.0);
  params_.push_back(std::move(p));
}

TinyModel::TinyModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.d_model, h = cfg_.hidden(), ff = 4 * d;
  Rng rng(cfg_.seed);
  auto normal = [&](std::string name, Group g, std::size_t rows, std::size_t cols, double std) {
    add_param(std::move(name), g, rows, cols);
    for (auto& v : params_.back().value) {
      v = std * rng.normal();
    }
  };
  auto constant = [&](std::string name, Group g, std::size_t n, double value) {
    add_param(std::move(name), g, n, 1);
    std::fill(params_.back().value.begin(), params_.back().value.end(), value);
  };
  const double inv_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double attn_std = cfg_.attn_std > 0.0 ? cfg_.attn_std : inv_d;
  const double head_std = cfg_.head_std > 0.0 ? cfg_.head_std : inv_d;
  const double fc_std = cfg_.mlp_std > 0.0 ? cfg_.mlp_std : inv_d;
  const double out_std = cfg_.mlp_std > 0.0 ? cfg_.mlp_std : 1.0 / std::sqrt(static_cast<double>(ff));

  normal("tok_emb", Group::base, cfg_.vocab_size, d, cfg_.embed_std);
  normal("pos_emb", Group::base, cfg_.max_context, d, cfg_.embed_std);
  normal("enc.w", Group::base, cfg_.encoder_dim, cfg_.patch_dim, 1.0 / std::sqrt(static_cast<double>(cfg_.patch_dim)));
  normal("proj.w1", Group::projector, h, cfg_.encoder_dim, 1.0 / std::sqrt(static_cast<double>(cfg_.encoder_dim)));
  constant("proj.b1", Group::projector, h, 0.0);
  normal("proj.w2", Group::projector, d, h, 1.0 / std::sqrt(static_cast<double>(h)));
  constant("proj.b2", Group::projector, d, 0.0);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    constant(layer_name(l, "ln1.g"), Group::base, d, 1.0);
    constant(layer_name(l, "ln1.b"), Group::base, d, 0.0);
    for (const char* m : kAttn) {
      normal(layer_name(l, std::string("attn.") + m + ".w"), Group::base, d, d, attn_std);
    }
    constant(layer_name(l, "ln2.g"), Group::base, d, 1.0);
    constant(layer_name(l, "ln2.b"), Group::base, d, 0.0);
    normal(layer_name(l, "mlp.fc.w"), Group::base, ff, d, fc_std);
    constant(layer_name(l, "mlp.fc.b"), Group::base, ff, 0.0);
    normal(layer_name(l, "mlp.proj.w"), Group::base, d, ff, out_std);
    constant(layer_name(l, "mlp.proj.b"), Group::base, d, 0.0);
  }
  constant("ln_f.g", Group::base, d, 1.0);
  constant("ln_f.b", Group::base, d, 0.0);
  normal("head.w", Group::base, cfg_.vocab_size, d, head_std);
}

std::size_t TinyModel::index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) {
      return i;
    }
  }
  throw Error("no parameter named " + std::string(name));
}

Param& TinyModel::param(std::string_view name) { return params_[index(name)]; }
const Param& TinyModel::param(std::string_view name) const { return params_[index(name)]; }

bool TinyModel::has_param(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
}

void TinyModel::attach_lora(const LoraConfig& cfg, std::uint64_t seed) {
  if (lora_) {
    throw Error("LoRA adapters are already attached");
  }
  if (cfg.rank < 1 || !(cfg.alpha > 0.0)) {
    throw Error("LoRA needs rank >= 1 and alpha > 0");
  }
  const std::size_t d = cfg_.d_model;
  std::uint64_t k = 0;
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    for (const char* m : kAttn) {
      auto lp = init_lora(d, d, cfg, seed + 0x9E3779B97F4A7C15ull * ++k);
      const auto base = layer_name(l, std::string("attn.") + m);
      add_param(base + ".lora_a", Group::lora, lp.a.rows, lp.a.cols);
      params_.back().value = lp.a.data;
      add_param(base + ".lora_b", Group::lora, lp.b.rows, lp.b.cols);
    }
  }
  lora_ = cfg;
}

TinyModel TinyModel::merged() const {
  if (!lora_) {
    return *this;
  }
  TinyModel out = *this;
  std::vector<Param> kept;
  for (auto& p : out.params_) {
    if (p.group != Group::lora) {
      kept.push_back(p);
    }
  }
  for (auto& p : kept) {
    if (!p.name.ends_with(".w") || p.name.find(".attn.") == std::string::npos) {
      continue;
    }
    const auto stem = p.name.substr(0, p.name.size() - 2);
    const auto& a = param(stem + ".lora_a");
    const auto& b = param(stem + ".lora_b");
    Matrix w(p.rows, p.cols);
    w.data = p.value;
    LoraParams lp{Matrix(a.rows, a.cols), Matrix(b.rows, b.cols), lora_->alpha};
    lp.a.data = a.value;
    lp.b.data = b.value;
    p.value = merge_lora(w, lp).data;
  }
  out.params_ = std::move(kept);
  out.lora_.reset();
  return out;
}

std::uint64_t TinyModel::group_hash(Group g) const {
  std::string bytes;
  for (const auto& p : params_) {
    if (p.group == g) {
      bytes.append(p.name);
      bytes.append(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(double));
    }
  }
  return fnv1a(bytes);
}

std::size_t TinyModel::group_size(Group g) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.group == g) {
      n += p.value.size();
    }
  }
  return n;
}

void TinyModel::set_trainable(std::initializer_list<Group> groups) {
  for (auto& p : params_) {
    p.trainable = std::find(groups.begin(), groups.end(), p.group) != groups.end();
  }
}

void TinyModel::zero_grad() {
  for (auto& p : params_) {
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
}

ProjectorParams TinyModel::projector() const {
  const auto& w1 = param("proj.w1");
  const auto& w2 = param("proj.w2");
  ProjectorParams p{Matrix(w1.rows, w1.cols), param("proj.b1").value, Matrix(w2.rows, w2.cols),
                    param("proj.b2").value};
  p.w1.data = w1.value;
  p.w2.data = w2.value;
  return p;
}

Matrix TinyModel::encode(const audio::TokenGrid& grid) const {
  if (grid.dim != cfg_.patch_dim) {
    throw Error("encode: token dim " + std::to_string(grid.dim) + " does not match patch dim " +
                std::to_string(cfg_.patch_dim));
  }
  Matrix x(grid.n_tokens, grid.dim);
  std::copy(grid.values.begin(), grid.values.end(), x.data.begin());
  Matrix out(grid.n_tokens, cfg_.encoder_dim);
  kernels::serial::matmul_nt(x.data, param("enc.w").value, out.data, grid.n_tokens, grid.dim, cfg_.encoder_dim);
  return out;
}

Matrix TinyModel::prefix(const Matrix& encoded) const {
  if (encoded.cols != cfg_.encoder_dim) {
    throw Error("prefix: encoder dim mismatch");
  }
  return project(encoded, projector());
}

void TinyModel::run(const Matrix& encoded, std::span<const int> text, Forward& f, kernels::Exec exec) const {
  if (encoded.cols != cfg_.encoder_dim) {
    throw Error("forward: encoder dim mismatch");
  }
  const std::size_t d = cfg_.d_model, H = cfg_.n_heads, dh = d / H, hid = cfg_.hidden();
  f.P = encoded.rows;
  f.T = text.size();
  f.S = f.P + f.T;
  const std::size_t P = f.P, S = f.S;
  if (S > cfg_.max_context) {
    throw Error("context overflow: " + std::to_string(S) + " positions exceed " + std::to_string(cfg_.max_context));
  }
  for (int id : text) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
      throw Error("token id " + std::to_string(id) + " is outside the vocabulary");
    }
  }
  const double lora_scale = lora_ ? lora_->alpha / static_cast<double>(lora_->rank) : 0.0;

  // Projector.
  f.encoded = encoded;
  f.f1 = Matrix(P, hid);
  kernels::matmul_nt(encoded.data, param("proj.w1").value, f.f1.data, P, cfg_.encoder_dim, hid, exec);
  add_bias(f.f1, param("proj.b1").value);
  f.a1 = f.f1;
  for (auto& v : f.a1.data) {
    v = gelu(v);
  }
  Matrix pre(P, d);
  kernels::matmul_nt(f.a1.data, param("proj.w2").value, pre.data, P, hid, d, exec);
  add_bias(pre, param("proj.b2").value);

  // Embeddings. Text positions count from the start of the text, so a base
  // pretrained without a prefix sees the same positions once one is added.
  const auto& tok = param("tok_emb").value;
  const auto& pos = param("pos_emb").value;
  f.x0 = Matrix(S, d);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      f.x0.at(s, j) = s < P ? pre.at(s, j) : tok[static_cast<std::size_t>(text[s - P]) * d + j] + pos[(s - P) * d + j];
    }
  }

  auto linear = [&](const Matrix& x, const std::string& stem, Matrix& y, Matrix* u) {
    const auto& w = param(stem + ".w");
    y = Matrix(x.rows, w.rows);
    kernels::matmul_nt(x.data, w.value, y.data, x.rows, w.cols, w.rows, exec);
    if (u != nullptr && lora_) {
      const auto& a = param(stem + ".lora_a");
      const auto& b = param(stem + ".lora_b");
      *u = Matrix(x.rows, a.rows);
      kernels::matmul_nt(x.data, a.value, u->data, x.rows, a.cols, a.rows, exec);
      Matrix delta(x.rows, b.rows);
      kernels::matmul_nt(u->data, b.value, delta.data, x.rows, b.cols, b.rows, exec);
      for (std::size_t i = 0; i < y.data.size(); ++i) {
        y.data[i] += lora_scale * delta.data[i];
      }
    }
  };

  f.layers.assign(cfg_.n_layers, {});
  Matrix x = f.x0;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    auto& L = f.layers[l];
    L.x_in = x;
    layer_norm(x, param(layer_name(l, "ln1.g")).value, param(layer_name(l, "ln1.b")).value, L.h1, L.ln1);
    const auto stem = layer_name(l, "attn.");
    linear(L.h1, stem + "q", L.q, &L.u[0]);
    linear(L.h1, stem + "k", L.k, &L.u[1]);
    linear(L.h1, stem + "v", L.v, &L.u[2]);
    L.ctx = Matrix(S, d);
    L.probs.assign(H * S * S, 0.0);
    for (std::size_t hh = 0; hh < H; ++hh) {
      const std::size_t off = hh * dh;
      for (std::size_t i = 0; i < S; ++i) {
        double* p = &L.probs[(hh * S + i) * S];
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            dot += L.q.at(i, off + c) * L.k.at(j, off + c);
          }
          p[j] = dot * inv_sqrt_dh;
          mx = std::max(mx, p[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] = std::exp(p[j] - mx);
          sum += p[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] /= sum;
          for (std::size_t c = 0; c < dh; ++c) {
            L.ctx.at(i, off + c) += p[j] * L.v.at(j, off + c);
          }
        }
      }
    }
    Matrix o;
    linear(L.ctx, stem + "o", o, &L.u[3]);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      x.data[i] += o.data[i];
    }
    L.x_mid = x;
    layer_norm(x, param(layer_name(l, "ln2.g")).value, param(layer_name(l, "ln2.b")).value, L.h2, L.ln2);
    linear(L.h2, layer_name(l, "mlp.fc"), L.fc, nullptr);
    add_bias(L.fc, param(layer_name(l, "mlp.fc.b")).value);
    L.act = L.fc;
    for (auto& v : L.act.data) {
      v = gelu(v);
    }
    Matrix m;
    linear(L.act, layer_name(l, "mlp.proj"), m, nullptr);
    add_bias(m, param(layer_name(l, "mlp.proj.b")).value);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      x.data[i] += m.data[i];
    }
  }
  f.x_final = x;
  layer_norm(x, param("ln_f.g").value, param("ln_f.b").value, f.h_final, f.ln_f);
  f.logits = Matrix(f.T, cfg_.vocab_size);
  if (f.T > 0) {
    kernels::matmul_nt(std::span<const double>(f.h_final.data).subspan(P * d), param("head.w").value,
                       f.logits.data, f.T, d, cfg_.vocab_size, exec);
  }
}

Matrix TinyModel::forward(const Matrix& encoded, std::span<const int> text, kernels::Exec exec) const {
  Forward f;
  run(encoded, text, f, exec);
  return std::move(f.logits);
}

Matrix TinyModel::forward(const audio::TokenGrid& grid, std::span<const int> text, kernels::Exec exec) const {
  return forward(encode(grid), text, exec);
}

std::pair<double, std::size_t> TinyModel::loss(const Matrix& encoded, const Sequence& seq, bool backward,
                                               kernels::Exec exec) {
  if (seq.tokens.size() < 2 || seq.loss_mask.size() + 1 != seq.tokens.size()) {
    throw Error("loss: malformed sequence");
  }
  const std::span<const int> inputs(seq.tokens.data(), seq.tokens.size() - 1);
  Forward f;
  run(encoded, inputs, f, exec);
  const std::size_t T = f.T, P = f.P, S = f.S, V = cfg_.vocab_size, d = cfg_.d_model;
  const std::size_t H = cfg_.n_heads, dh = d / H, hid = cfg_.hidden();

  double total = 0.0;
  std::size_t count = 0;
  Matrix dlogits(T, V);
  for (std::size_t t = 0; t < T; ++t) {
    if (!seq.loss_mask[t]) {
      continue;
    }
    const auto row = f.logits.row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) {
      sum += std::exp(z - mx);
    }
    const double lse = mx + std::log(sum);
    const auto label = static_cast<std::size_t>(seq.tokens[t + 1]);
    total += lse - row[label];
    ++count;
    for (std::size_t v = 0; v < V; ++v) {
      dlogits.at(t, v) = std::exp(row[v] - lse);
    }
    dlogits.at(t, label) -= 1.0;
  }
  if (!backward || count == 0) {
    return {total, count};
  }

  const double lora_scale = lora_ ? lora_->alpha / static_cast<double>(lora_->rank) : 0.0;
  auto grad_of = [&](const std::string& name) -> Param* {
    auto& p = param(name);
    return p.trainable ? &p : nullptr;
  };

  // Linear backward: y = x W^T (+ s (x A^T) B^T). dx accumulates.
  auto linear_back = [&](const Matrix& dy, const Matrix& x, const std::string& stem, Matrix& dx, const Matrix* u) {
    const auto& w = param(stem + ".w");
    Matrix tmp(dy.rows, w.cols);
    kernels::matmul_nn(dy.data, w.value, tmp.data, dy.rows, w.rows, w.cols, exec);
    for (std::size_t i = 0; i < tmp.data.size(); ++i) {
      dx.data[i] += tmp.data[i];
    }
    if (auto* pw = grad_of(stem + ".w")) {
      kernels::matmul_tn_acc(dy.data, x.data, pw->grad, w.rows, dy.rows, w.cols, exec);
    }
    if (u != nullptr && lora_) {
      auto& a = param(stem + ".lora_a");
      auto& b = param(stem + ".lora_b");
      const std::size_t r = a.rows;
      Matrix du(dy.rows, r);
      kernels::matmul_nn(dy.data, b.value, du.data, dy.rows, b.rows, r, exec);
      for (auto& v : du.data) {
        v *= lora_scale;
      }
      Matrix dxa(dy.rows, a.cols);
      kernels::matmul_nn(du.data, a.value, dxa.data, dy.rows, r, a.cols, exec);
      for (std::size_t i = 0; i < dxa.data.size(); ++i) {
        dx.data[i] += dxa.data[i];
      }
      if (a.trainable) {
        kernels::matmul_tn_acc(du.data, x.data, a.grad, r, dy.rows, a.cols, exec);
      }
      if (b.trainable) {
        Matrix su = *u;
        for (auto& v : su.data) {
          v *= lora_scale;
        }
        kernels::matmul_tn_acc(dy.data, su.data, b.grad, b.rows, dy.rows, r, exec);
      }
    }
  };
  auto ln_back = [&](const Matrix& dy, const LayerNormCache& c, const std::string& stem, Matrix& dx) {
    auto* g = grad_of(stem + ".g");
    auto* b = grad_of(stem + ".b");
    layer_norm_backward(dy, c, param(stem + ".g").value, dx, g ? g->grad.data() : nullptr,
                        b ? b->grad.data() : nullptr);
  };

  // Head.
  Matrix dh_final(S, d);
  {
    const auto& head = param("head.w");
    kernels::matmul_nn(dlogits.data, head.value, std::span<double>(dh_final.data).subspan(P * d), T, V, d, exec);
    if (auto* pw = grad_of("head.w")) {
      kernels::matmul_tn_acc(dlogits.data, std::span<const double>(f.h_final.data).subspan(P * d), pw->grad, V, T, d,
                             exec);
    }
  }
  Matrix dx(S, d);
  ln_back(dh_final, f.ln_f, "ln_f", dx);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = cfg_.n_layers; l-- > 0;) {
    const auto& L = f.layers[l];
    // MLP branch.
    Matrix dm = dx;
    if (auto* pb = grad_of(layer_name(l, "mlp.proj.b"))) {
      bias_grad(dm, pb->grad);
    }
    Matrix dact(S, 4 * d);
    linear_back(dm, L.act, layer_name(l, "mlp.proj"), dact, nullptr);
    for (std::size_t i = 0; i < dact.data.size(); ++i) {
      dact.data[i] *= gelu_grad(L.fc.data[i]);
    }
    if (auto* pb = grad_of(layer_name(l, "mlp.fc.b"))) {
      bias_grad(dact, pb->grad);
    }
    Matrix dh2(S, d);
    linear_back(dact, L.h2, layer_name(l, "mlp.fc"), dh2, nullptr);
    ln_back(dh2, L.ln2, layer_name(l, "ln2"), dx);

    // Attention branch.
    const auto stem = layer_name(l, "attn.");
    Matrix dctx(S, d);
    linear_back(dx, L.ctx, stem + "o", dctx, &L.u[3]);
    Matrix dq(S, d), dk(S, d), dv(S, d);
    std::vector<double> dp(S);
    for (std::size_t hh = 0; hh < H; ++hh) {
      const std::size_t off = hh * dh;
      for (std::size_t i = 0; i < S; ++i) {
        const double* p = &L.probs[(hh * S + i) * S];
        double dot_sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          double g = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            g += dctx.at(i, off + c) * L.v.at(j, off + c);
            dv.at(j, off + c) += p[j] * dctx.at(i, off + c);
          }
          dp[j] = g;
          dot_sum += g * p[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = p[j] * (dp[j] - dot_sum) * inv_sqrt_dh;
          if (ds == 0.0) {
            continue;
          }
          for (std::size_t c = 0; c < dh; ++c) {
            dq.at(i, off + c) += ds * L.k.at(j, off + c);
            dk.at(j, off + c) += ds * L.q.at(i, off + c);
          }
        }
      }
    }
    Matrix dh1(S, d);
    linear_back(dq, L.h1, stem + "q", dh1, &L.u[0]);
    linear_back(dk, L.h1, stem + "k", dh1, &L.u[1]);
    linear_back(dv, L.h1, stem + "v", dh1, &L.u[2]);
    ln_back(dh1, L.ln1, layer_name(l, "ln1"), dx);
  }

  // Embeddings.
  if (auto* pp = grad_of("pos_emb")) {
    for (std::size_t i = 0; i < T * d; ++i) {
      pp->grad[i] += dx.data[P * d + i];
    }
  }
  if (auto* pt = grad_of("tok_emb")) {
    for (std::size_t s = P; s < S; ++s) {
      const auto id = static_cast<std::size_t>(inputs[s - P]);
      for (std::size_t j = 0; j < d; ++j) {
        pt->grad[id * d + j] += dx.at(s, j);
      }
    }
  }

  // Projector.
  auto* w1 = grad_of("proj.w1");
  auto* b1 = grad_of("proj.b1");
  auto* w2 = grad_of("proj.w2");
  auto* b2 = grad_of("proj.b2");
  if (P > 0 && (w1 || b1 || w2 || b2)) {
    const std::span<const double> dpre(dx.data.data(), P * d);
    if (b2) {
      for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          b2->grad[j] += dpre[i * d + j];
        }
      }
    }
    if (w2) {
      kernels::matmul_tn_acc(dpre, f.a1.data, w2->grad, d, P, hid, exec);
    }
    Matrix da(P, hid);
    kernels::matmul_nn(dpre, param("proj.w2").value, da.data, P, d, hid, exec);
    for (std::size_t i = 0; i < da.data.size(); ++i) {
      da.data[i] *= gelu_grad(f.f1.data[i]);
    }
    if (b1) {
      bias_grad(da, b1->grad);
    }
    if (w1) {
      kernels::matmul_tn_acc(da.data, f.encoded.data, w1->grad, hid, P, cfg_.encoder_dim, exec);
    }
  }
  return {total, count};
}

std::vector<int> TinyModel::greedy_decode(const Matrix& encoded, std::span<const int> prompt, std::size_t max_new,
                                          kernels::Exec exec) const {
  std::vector<int> text(prompt.begin(), prompt.end());
  std::vector<int> out;
  if (text.empty()) {
    text.push_back(kBos);
  }
  for (std::size_t step = 0; step < max_new; ++step) {
    const auto logits = forward(encoded, text, exec);
    const auto row = logits.row(logits.rows - 1);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == kEos) {
      break;
    }
    out.push_back(best);
    text.push_back(best);
  }
  return out;
}

} // namespace omk::mllm
