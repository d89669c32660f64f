#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace omk::kernels::detail {

// FFTW planning is not thread-safe; execution through the new-array interface
// is. Plans are created and destroyed under this mutex.
std::mutex& fftw_planner_mutex();

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // Per-caller scratch, aligned the same way as the planning buffers.
  struct Scratch {
    std::unique_ptr<double, FftwFree> in;
    std::unique_ptr<fftw_complex, FftwFree> out;
  };
  Scratch make_scratch() const;

  /// Transforms scratch.in in place into scratch.out.
  void execute(Scratch& s) const { fftw_execute_dft_r2c(plan_, s.in.get(), s.out.get()); }

private:
  std::size_t n_;
  fftw_plan plan_ = nullptr;
};

/// Copies frame `f` of a centered/uncentered STFT into `dst` (n_fft values),
/// applying `window` (win_length values centered in the frame).
void load_frame(std::span<const float> signal, std::size_t f, std::size_t n_fft, std::size_t hop,
                bool center, std::span<const double> window, double* dst);

} // namespace omk::kernels::detail
