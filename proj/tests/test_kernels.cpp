#include <cmath>
#include <complex>
#include <numbers>

#include <omp.h>

#include "doctest.h"
#include "omk/kernels.hpp"
#include "omk/rng.hpp"

using namespace omk;
using namespace omk::kernels;

namespace {

std::vector<float> random_signal(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<float> s(n);
  for (auto& x : s) {
    x = static_cast<float>(r.uniform(-1.0, 1.0));
  }
  return s;
}

std::vector<double> random_doubles(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<double> v(n);
  for (auto& x : v) {
    x = r.uniform(-1.0, 1.0);
  }
  return v;
}

// Direct DFT of one centered, windowed frame.
std::vector<double> naive_frame_power(const std::vector<float>& s, std::size_t f, const StftShape& shape) {
  const auto w = hann_window(shape.win_length);
  const std::size_t off = (shape.n_fft - shape.win_length) / 2;
  std::vector<double> frame(shape.n_fft, 0.0);
  const long start = static_cast<long>(f * shape.hop) - static_cast<long>(shape.n_fft / 2);
  for (std::size_t i = 0; i < shape.win_length; ++i) {
    const long idx = start + static_cast<long>(off + i);
    if (idx >= 0 && idx < static_cast<long>(s.size())) {
      frame[off + i] = s[static_cast<std::size_t>(idx)] * w[i];
    }
  }
  std::vector<double> out(shape.n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < shape.n_fft; ++n) {
      acc += frame[n] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) /
                                            static_cast<double>(shape.n_fft));
    }
    out[k] = std::norm(acc);
  }
  return out;
}

} // namespace

TEST_CASE("hann window is periodic") {
  const auto w = hann_window(8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[6] == doctest::Approx(0.5));
}

TEST_CASE("stft frame count") {
  StftShape s;
  CHECK(stft_frame_count(160000, s) == 1001);
  s.center = false;
  CHECK(stft_frame_count(511, s) == 0);
  CHECK(stft_frame_count(512 + 160 * 3, s) == 4);
}

TEST_CASE("stft power matches a direct DFT") {
  const auto sig = random_signal(4000, 1);
  StftShape shape;
  const auto p = serial::stft_power(sig, shape);
  const std::size_t bins = shape.n_fft / 2 + 1;
  REQUIRE(p.size() == stft_frame_count(sig.size(), shape) * bins);
  for (std::size_t f : {0u, 1u, 7u, 24u}) {
    const auto ref = naive_frame_power(sig, f, shape);
    for (std::size_t k = 0; k < bins; ++k) {
      CHECK(p[f * bins + k] == doctest::Approx(ref[k]).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("parallel kernels equal the serial reference bit for bit") {
  for (int threads : {1, 2, 3, 4}) {
    omp_set_num_threads(threads);
    CAPTURE(threads);

    const auto sig = random_signal(16000, 2);
    StftShape shape;
    CHECK(serial::stft_power(sig, shape) == parallel::stft_power(sig, shape));

    const std::size_t frames = 37, bins = 257, filters = 128;
    const auto power = random_doubles(frames * bins, 3);
    const auto bank = random_doubles(filters * bins, 4);
    std::vector<double> a(frames * filters), b(frames * filters);
    serial::apply_filterbank(power, frames, bins, bank, filters, a);
    parallel::apply_filterbank(power, frames, bins, bank, filters, b);
    CHECK(a == b);

    const auto tokens = random_signal(96 * 16, 5);
    std::vector<float> pa(12 * 16), pb(12 * 16);
    serial::mean_pool(tokens, 96, 16, 8, pa);
    parallel::mean_pool(tokens, 96, 16, 8, pb);
    CHECK(pa == pb);

    const std::size_t m = 29, k = 17, n = 23;
    const auto x = random_doubles(m * k, 6);
    const auto y = random_doubles(n * k, 7);
    std::vector<double> c1(m * n), c2(m * n);
    serial::matmul_nt(x, y, c1, m, k, n);
    parallel::matmul_nt(x, y, c2, m, k, n);
    CHECK(c1 == c2);

    const auto z = random_doubles(k * n, 8);
    serial::matmul_nn(x, z, c1, m, k, n);
    parallel::matmul_nn(x, z, c2, m, k, n);
    CHECK(c1 == c2);

    const auto t = random_doubles(k * m, 9);
    std::vector<double> d1(m * n, 0.5), d2(m * n, 0.5);
    serial::matmul_tn_acc(t, z, d1, m, k, n);
    parallel::matmul_tn_acc(t, z, d2, m, k, n);
    CHECK(d1 == d2);
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("matmul variants agree with a naive triple loop") {
  const std::size_t m = 5, k = 4, n = 3;
  const auto a = random_doubles(m * k, 10);
  const auto bt = random_doubles(n * k, 11);
  std::vector<double> c(m * n);
  serial::matmul_nt(a, bt, c, m, k, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        s += a[i * k + l] * bt[j * k + l];
      }
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
  }
  // nn with B = bt^T
  std::vector<double> b(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t l = 0; l < k; ++l) {
      b[l * n + j] = bt[j * k + l];
    }
  }
  std::vector<double> c2(m * n);
  serial::matmul_nn(a, b, c2, m, k, n);
  for (std::size_t i = 0; i < m * n; ++i) {
    CHECK(c2[i] == doctest::Approx(c[i]).epsilon(1e-14));
  }
  // tn_acc with A^T stored as k x m
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      at[l * m + i] = a[i * k + l];
    }
  }
  std::vector<double> c3(m * n, 1.0);
  serial::matmul_tn_acc(at, b, c3, m, k, n);
  for (std::size_t i = 0; i < m * n; ++i) {
    CHECK(c3[i] == doctest::Approx(c[i] + 1.0).epsilon(1e-14));
  }
}

TEST_CASE("mean pool averages consecutive rows") {
  std::vector<float> in{1, 10, 3, 30, 5, 50, 7, 70};
  std::vector<float> out(4);
  serial::mean_pool(in, 4, 2, 2, out);
  CHECK(out == std::vector<float>{2, 20, 6, 60});
}
