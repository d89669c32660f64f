#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fft_plan.hpp"
#include "omk/kernels.hpp"

namespace omk::kernels {

namespace detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

RealFft::RealFft(std::size_t n) : n_(n) {
  std::lock_guard lock(fftw_planner_mutex());
  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (plan_ == nullptr) {
    throw std::runtime_error("fftw planning failed");
  }
}

RealFft::~RealFft() {
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan_);
}

RealFft::Scratch RealFft::make_scratch() const {
  Scratch s;
  s.in.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n_)));
  s.out.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins())));
  return s;
}

void load_frame(std::span<const float> signal, std::size_t f, std::size_t n_fft, std::size_t hop,
                bool center, std::span<const double> window, double* dst) {
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  const std::ptrdiff_t frame_start =
      static_cast<std::ptrdiff_t>(f * hop) - (center ? static_cast<std::ptrdiff_t>(n_fft / 2) : 0);
  const std::size_t win_offset = (n_fft - window.size()) / 2;
  for (std::size_t i = 0; i < n_fft; ++i) {
    dst[i] = 0.0;
  }
  for (std::size_t i = 0; i < window.size(); ++i) {
    const std::ptrdiff_t idx = frame_start + static_cast<std::ptrdiff_t>(win_offset + i);
    if (idx >= 0 && idx < n) {
      dst[win_offset + i] = static_cast<double>(signal[static_cast<std::size_t>(idx)]) * window[i];
    }
  }
}

} // namespace detail

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t stft_frame_count(std::size_t n_samples, const StftShape& shape) {
  if (shape.center) {
    return 1 + n_samples / shape.hop;
  }
  if (n_samples < shape.n_fft) {
    return 0;
  }
  return 1 + (n_samples - shape.n_fft) / shape.hop;
}

namespace serial {

std::vector<double> stft_power(std::span<const float> signal, const StftShape& shape) {
  if (shape.win_length > shape.n_fft || shape.hop == 0) {
    throw std::invalid_argument("invalid STFT shape");
  }
  const std::size_t frames = stft_frame_count(signal.size(), shape);
  const detail::RealFft fft(shape.n_fft);
  const std::size_t bins = fft.bins();
  const auto window = hann_window(shape.win_length);
  std::vector<double> power(frames * bins);
  auto scratch = fft.make_scratch();
  for (std::size_t f = 0; f < frames; ++f) {
    detail::load_frame(signal, f, shape.n_fft, shape.hop, shape.center, window, scratch.in.get());
    fft.execute(scratch);
    const fftw_complex* X = scratch.out.get();
    for (std::size_t b = 0; b < bins; ++b) {
      power[f * bins + b] = X[b][0] * X[b][0] + X[b][1] * X[b][1];
    }
  }
  return power;
}

void apply_filterbank(std::span<const double> power, std::size_t n_frames, std::size_t n_bins,
                      std::span<const double> bank, std::size_t n_filters, std::span<double> out) {
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* p = power.data() + f * n_bins;
    for (std::size_t m = 0; m < n_filters; ++m) {
      const double* w = bank.data() + m * n_bins;
      double acc = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) {
        acc += p[b] * w[b];
      }
      out[f * n_filters + m] = acc;
    }
  }
}

void mean_pool(std::span<const float> in, std::size_t n_rows, std::size_t dim, std::size_t factor,
               std::span<float> out) {
  const std::size_t groups = n_rows / factor;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (std::size_t r = 0; r < factor; ++r) {
        acc += in[(g * factor + r) * dim + d];
      }
      out[g * dim + d] = static_cast<float>(acc / static_cast<double>(factor));
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        acc += ai[t] * bj[t];
      }
      c[i * n + j] = acc;
    }
  }
}

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      ci[j] = 0.0;
    }
    const double* ai = a.data() + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) {
        ci[j] += av * bt[j];
      }
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[t * m + i];
      const double* bt = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) {
        ci[j] += av * bt[j];
      }
    }
  }
}

} // namespace serial
} // namespace omk::kernels
