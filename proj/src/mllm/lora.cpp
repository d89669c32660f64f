#include <cmath>

#include "omk/error.hpp"
#include "omk/mllm.hpp"
#include "omk/rng.hpp"

namespace omk::mllm {

namespace {

void check_shapes(const Matrix& w, const LoraParams& lora) {
  if (lora.a.rows == 0 || lora.a.cols != w.cols || lora.b.rows != w.rows || lora.b.cols != lora.a.rows) {
    throw Error("LoRA shape mismatch: W is " + std::to_string(w.rows) + "x" + std::to_string(w.cols) + ", A is " +
                std::to_string(lora.a.rows) + "x" + std::to_string(lora.a.cols) + ", B is " +
                std::to_string(lora.b.rows) + "x" + std::to_string(lora.b.cols));
  }
}

} // namespace

LoraParams init_lora(std::size_t d, std::size_t k, const LoraConfig& cfg, std::uint64_t seed) {
  if (cfg.rank < 1) {
    throw Error("LoRA rank must be at least 1");
  }
  LoraParams p{Matrix(cfg.rank, k), Matrix(d, cfg.rank), cfg.alpha};
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  for (auto& v : p.a.data) {
    v = rng.uniform(-bound, bound) * 0.01;
  }
  return p;
}

std::vector<double> lora_forward(const Matrix& w, const LoraParams& lora, std::span<const double> x) {
  check_shapes(w, lora);
  if (x.size() != w.cols) {
    throw Error("lora_forward: input has " + std::to_string(x.size()) + " entries, W expects " +
                std::to_string(w.cols));
  }
  std::vector<double> ax(lora.rank(), 0.0);
  for (std::size_t i = 0; i < lora.rank(); ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      ax[i] += lora.a.at(i, j) * x[j];
    }
  }
  const double s = lora.scale();
  std::vector<double> y(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double base = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) {
      base += w.at(i, j) * x[j];
    }
    double delta = 0.0;
    for (std::size_t r = 0; r < lora.rank(); ++r) {
      delta += lora.b.at(i, r) * ax[r];
    }
    y[i] = base + s * delta;
  }
  return y;
}

Matrix merge_lora(const Matrix& w, const LoraParams& lora) {
  check_shapes(w, lora);
  Matrix out = w;
  const double s = lora.scale();
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      double ba = 0.0;
      for (std::size_t r = 0; r < lora.rank(); ++r) {
        ba += lora.b.at(i, r) * lora.a.at(r, j);
      }
      out.at(i, j) += s * ba;
    }
  }
  return out;
}

} // namespace omk::mllm
