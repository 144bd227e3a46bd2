#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

#include "utivad/core/error.hpp"
#include "utivad/core/matrix.hpp"

namespace utivad::dsp {

enum class WindowKind { hann, rect };

inline std::vector<double> make_window(std::size_t n, WindowKind kind) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n));
    }
  }
  return w;
}

using ComplexFrames = std::vector<std::vector<std::complex<double>>>;

/// Short-time Fourier transform with frames synchronous to a hop grid: frame
/// i is centred on sample i*hop + hop/2 and zero-padded outside the signal,
/// so floor(N/hop) frames cover N samples. Plans use FFTW_ESTIMATE, which is
/// deterministic for a given build.
class Stft {
 public:
  Stft(std::size_t n_fft, std::size_t hop, WindowKind window = WindowKind::hann)
      : n_fft_(n_fft), hop_(hop), window_(make_window(n_fft, window)) {
    if (n_fft < 2 || hop < 1) fail_validation("invalid STFT geometry");
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_fft));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins()));
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), real_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_fft), spec_, real_, FFTW_ESTIMATE);
  }
  ~Stft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;

  std::size_t n_fft() const noexcept { return n_fft_; }
  std::size_t hop() const noexcept { return hop_; }
  std::size_t bins() const noexcept { return n_fft_ / 2 + 1; }
  std::size_t frames_for(std::size_t n_samples) const { return n_samples / hop_; }

  ComplexFrames analyze(const std::vector<double>& x) const {
    const std::size_t n_frames = frames_for(x.size());
    ComplexFrames out(n_frames, std::vector<std::complex<double>>(bins()));
    for (std::size_t f = 0; f < n_frames; ++f) {
      const long start = frame_start(f);
      for (std::size_t i = 0; i < n_fft_; ++i) {
        const long s = start + static_cast<long>(i);
        real_[i] = (s >= 0 && s < static_cast<long>(x.size())) ? x[s] * window_[i] : 0.0;
      }
      fftw_execute(fwd_);
      for (std::size_t k = 0; k < bins(); ++k) out[f][k] = {spec_[k][0], spec_[k][1]};
    }
    return out;
  }

  Matrix power(const std::vector<double>& x) const {
    const auto spec = analyze(x);
    Matrix p(spec.size(), bins());
    for (std::size_t f = 0; f < spec.size(); ++f)
      for (std::size_t k = 0; k < bins(); ++k) p(f, k) = std::norm(spec[f][k]);
    return p;
  }

  /// Weighted overlap-add inverse (least-squares estimate for this window).
  std::vector<double> synthesize(const ComplexFrames& frames, std::size_t n_samples) const {
    std::vector<double> y(n_samples, 0.0), norm(n_samples, 0.0);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      for (std::size_t k = 0; k < bins(); ++k) {
        spec_[k][0] = frames[f][k].real();
        spec_[k][1] = frames[f][k].imag();
      }
      fftw_execute(inv_);
      const long start = frame_start(f);
      for (std::size_t i = 0; i < n_fft_; ++i) {
        const long s = start + static_cast<long>(i);
        if (s < 0 || s >= static_cast<long>(n_samples)) continue;
        y[s] += real_[i] / static_cast<double>(n_fft_) * window_[i];
        norm[s] += window_[i] * window_[i];
      }
    }
    for (std::size_t s = 0; s < n_samples; ++s) {
      if (norm[s] > 1e-8) y[s] /= norm[s];
    }
    return y;
  }

 private:
  long frame_start(std::size_t f) const {
    return static_cast<long>(f * hop_ + hop_ / 2) - static_cast<long>(n_fft_ / 2);
  }

  std::size_t n_fft_;
  std::size_t hop_;
  std::vector<double> window_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

}  // namespace utivad::dsp
