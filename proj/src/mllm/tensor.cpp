#include <cmath>
#include <numbers>

#include "omk/error.hpp"
#include "omk/mllm.hpp"

namespace omk::mllm {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * pdf;
}

Matrix project(const Matrix& tokens, const ProjectorParams& p) {
  const std::size_t hidden = p.w1.rows;
  if (tokens.cols != p.w1.cols || p.b1.size() != hidden || p.w2.cols != hidden || p.b2.size() != p.w2.rows) {
    throw Error("project: dimension mismatch");
  }
  Matrix h(tokens.rows, hidden);
  kernels::serial::matmul_nt(tokens.data, p.w1.data, h.data, tokens.rows, tokens.cols, hidden);
  for (std::size_t i = 0; i < tokens.rows; ++i) {
    for (std::size_t j = 0; j < hidden; ++j) {
      h.at(i, j) = gelu(h.at(i, j) + p.b1[j]);
    }
  }
  Matrix out(tokens.rows, p.w2.rows);
  kernels::serial::matmul_nt(h.data, p.w2.data, out.data, tokens.rows, hidden, p.w2.rows);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      out.at(i, j) += p.b2[j];
    }
  }
  return out;
}

std::vector<int> encode_bytes(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) {
    ids.push_back(c);
  }
  return ids;
}

std::string decode_bytes(std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (id >= 0 && id < 256) {
      out += static_cast<char>(id);
    }
  }
  return out;
}

Sequence make_sequence(std::string_view prompt, std::string_view target) {
  Sequence s;
  s.tokens.push_back(kBos);
  for (int id : encode_bytes(prompt)) {
    s.tokens.push_back(id);
  }
  const std::size_t first_target = s.tokens.size();
  for (int id : encode_bytes(target)) {
    s.tokens.push_back(id);
  }
  s.tokens.push_back(kEos);
  s.loss_mask.assign(s.tokens.size() - 1, false);
  for (std::size_t i = first_target - 1; i + 1 < s.tokens.size(); ++i) {
    s.loss_mask[i] = true;
  }
  return s;
}

} // namespace omk::mllm
