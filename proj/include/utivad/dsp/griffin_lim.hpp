#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

#include "utivad/dsp/mel.hpp"

namespace utivad::dsp {

/// Linear-frequency magnitude estimate from a raw log-mel track: the
/// filterbank pseudo-inverse applied to mel power, clamped at zero.
inline Matrix mel_to_linear_magnitude(const MelTrack& m, const MelConfig& cfg) {
  if (m.standardized) fail_validation("griffin_lim expects raw log-mel values");
  const auto fb = mel_filterbank(cfg);
  if (fb.weights.rows != m.n_mels()) {
    fail_validation("mel track has ", m.n_mels(), " bands, config expects ",
                    fb.weights.rows);
  }
  Eigen::MatrixXd w(fb.weights.rows, fb.weights.cols);
  for (std::size_t r = 0; r < fb.weights.rows; ++r)
    for (std::size_t c = 0; c < fb.weights.cols; ++c) w(r, c) = fb.weights(r, c);
  const Eigen::MatrixXd pinv = w.completeOrthogonalDecomposition().pseudoInverse();
  Matrix mag(m.n_frames(), fb.weights.cols);
  Eigen::VectorXd mel_power(m.n_mels());
  for (std::size_t f = 0; f < m.n_frames(); ++f) {
    for (std::size_t b = 0; b < m.n_mels(); ++b) mel_power(b) = std::exp(m.frames(f, b));
    const Eigen::VectorXd lin = pinv * mel_power;
    for (std::size_t k = 0; k < mag.cols; ++k) mag(f, k) = std::sqrt(std::max(lin(k), 0.0));
  }
  return mag;
}

/// Iterative phase reconstruction from a mel spectrogram. Deterministic for
/// a given seed; output length is n_frames * hop samples.
inline Waveform griffin_lim(const MelTrack& m, const MelConfig& cfg = {},
                            int n_iters = 60, std::uint64_t seed = 0) {
  const Matrix mag = mel_to_linear_magnitude(m, cfg);
  const std::size_t hop = cfg.hop();
  Stft stft(cfg.n_fft, hop);
  const std::size_t n_samples = m.n_frames() * hop;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  ComplexFrames spec(m.n_frames(), std::vector<std::complex<double>>(stft.bins()));
  for (std::size_t f = 0; f < spec.size(); ++f)
    for (std::size_t k = 0; k < stft.bins(); ++k) spec[f][k] = std::polar(mag(f, k), u(rng));

  std::vector<double> y = stft.synthesize(spec, n_samples);
  for (int it = 0; it < n_iters; ++it) {
    const ComplexFrames est = stft.analyze(y);
    for (std::size_t f = 0; f < spec.size(); ++f)
      for (std::size_t k = 0; k < stft.bins(); ++k) {
        const double a = std::abs(est[f][k]);
        const auto phase = a > 1e-12 ? est[f][k] / a : std::complex<double>(1.0, 0.0);
        spec[f][k] = mag(f, k) * phase;
      }
    y = stft.synthesize(spec, n_samples);
  }
  Waveform w{std::move(y), cfg.sample_rate};
  for (double& v : w.samples) v = std::clamp(v, -1.0, 1.0);
  return w;
}

}  // namespace utivad::dsp
