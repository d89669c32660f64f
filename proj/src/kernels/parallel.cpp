#include <omp.h>

#include <stdexcept>

#include "fft_plan.hpp"
#include "omk/kernels.hpp"

namespace omk::kernels::parallel {

namespace {
// Below this many scalar multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 15;

bool worth_it(std::size_t work) { return work >= kMinParallelWork && omp_get_max_threads() > 1; }
} // namespace

std::vector<double> stft_power(std::span<const float> signal, const StftShape& shape) {
  if (shape.win_length > shape.n_fft || shape.hop == 0) {
    throw std::invalid_argument("invalid STFT shape");
  }
  const std::size_t frames = stft_frame_count(signal.size(), shape);
  const detail::RealFft fft(shape.n_fft);
  const std::size_t bins = fft.bins();
  const auto window = hann_window(shape.win_length);
  std::vector<double> power(frames * bins);
  const auto n_frames = static_cast<std::ptrdiff_t>(frames);

#pragma omp parallel
  {
    auto scratch = fft.make_scratch();
#pragma omp for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < n_frames; ++fi) {
      const auto f = static_cast<std::size_t>(fi);
      detail::load_frame(signal, f, shape.n_fft, shape.hop, shape.center, window, scratch.in.get());
      fft.execute(scratch);
      const fftw_complex* X = scratch.out.get();
      for (std::size_t b = 0; b < bins; ++b) {
        power[f * bins + b] = X[b][0] * X[b][0] + X[b][1] * X[b][1];
      }
    }
  }
  return power;
}

void apply_filterbank(std::span<const double> power, std::size_t n_frames, std::size_t n_bins,
                      std::span<const double> bank, std::size_t n_filters, std::span<double> out) {
  const auto frames = static_cast<std::ptrdiff_t>(n_frames);
#pragma omp parallel for schedule(static) if (worth_it(n_frames * n_bins * n_filters))
  for (std::ptrdiff_t fi = 0; fi < frames; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
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
  const auto groups = static_cast<std::ptrdiff_t>(n_rows / factor);
#pragma omp parallel for schedule(static) if (worth_it(n_rows * dim))
  for (std::ptrdiff_t gi = 0; gi < groups; ++gi) {
    const auto g = static_cast<std::size_t>(gi);
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
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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

} // namespace omk::kernels::parallel
