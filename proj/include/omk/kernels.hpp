#pragma once

// Data-parallel inner loops used by the front-end, the metrics fan-out and the
// toy model. Every kernel exists twice: a plain serial reference and an OpenMP
// version. The parallel versions partition output rows only, so each output
// element is accumulated in the same order as the serial reference and the two
// agree bit for bit regardless of thread count.

#include <cstddef>
#include <span>
#include <vector>

namespace omk::kernels {

enum class Exec { serial, parallel };

struct StftShape {
  std::size_t n_fft = 512;
  std::size_t win_length = 400;
  std::size_t hop = 160;
  bool center = true; // zero-pad n_fft/2 on both sides
};

/// Number of frames a (centered) STFT produces over `n_samples`.
std::size_t stft_frame_count(std::size_t n_samples, const StftShape& shape);

namespace serial {

/// Power spectrogram |X|^2 with a periodic Hann window of win_length samples
/// centered in an n_fft frame. Output is frames x (n_fft/2 + 1), row-major.
std::vector<double> stft_power(std::span<const float> signal, const StftShape& shape);

/// out[f][m] = sum_b power[f][b] * bank[m][b]
void apply_filterbank(std::span<const double> power, std::size_t n_frames, std::size_t n_bins,
                      std::span<const double> bank, std::size_t n_filters, std::span<double> out);

/// Groups of `factor` consecutive rows averaged into one.
void mean_pool(std::span<const float> in, std::size_t n_rows, std::size_t dim, std::size_t factor,
               std::span<float> out);

/// C(m x n) = A(m x k) * B(n x k)^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
/// C(m x n) = A(m x k) * B(k x n)
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
/// C(m x n) += A(k x m)^T * B(k x n)
void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

} // namespace serial

namespace parallel {

std::vector<double> stft_power(std::span<const float> signal, const StftShape& shape);
void apply_filterbank(std::span<const double> power, std::size_t n_frames, std::size_t n_bins,
                      std::span<const double> bank, std::size_t n_filters, std::span<double> out);
void mean_pool(std::span<const float> in, std::size_t n_rows, std::size_t dim, std::size_t factor,
               std::span<float> out);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

} // namespace parallel

// Dispatch helpers.
inline std::vector<double> stft_power(std::span<const float> signal, const StftShape& shape,
                                      Exec exec = Exec::parallel) {
  return exec == Exec::serial ? serial::stft_power(signal, shape) : parallel::stft_power(signal, shape);
}

inline void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, Exec exec = Exec::parallel) {
  exec == Exec::serial ? serial::matmul_nt(a, b, c, m, k, n) : parallel::matmul_nt(a, b, c, m, k, n);
}

inline void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, Exec exec = Exec::parallel) {
  exec == Exec::serial ? serial::matmul_nn(a, b, c, m, k, n) : parallel::matmul_nn(a, b, c, m, k, n);
}

inline void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t k, std::size_t n, Exec exec = Exec::parallel) {
  exec == Exec::serial ? serial::matmul_tn_acc(a, b, c, m, k, n)
                       : parallel::matmul_tn_acc(a, b, c, m, k, n);
}

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

} // namespace omk::kernels
