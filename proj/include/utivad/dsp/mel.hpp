#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "utivad/core/log.hpp"
#include "utivad/core/matrix.hpp"
#include "utivad/dsp/stft.hpp"
#include "utivad/dsp/wav.hpp"

namespace utivad::dsp {

inline constexpr std::size_t kMelBands = 80;
inline constexpr std::size_t kCepstra = 13;

// ---- framing ----

inline std::size_t frame_length(int sample_rate, double frame_ms) {
  return static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
}

/// Splits into frames of frame_ms (rounded to whole samples) every
/// hop_samples; the trailing partial frame is dropped. A signal shorter than
/// one frame yields zero rows.
inline Matrix frame_signal(const Waveform& w, double frame_ms, std::size_t hop_samples,
                           WindowKind window = WindowKind::rect) {
  const std::size_t len = frame_length(w.sample_rate, frame_ms);
  if (len < 1 || hop_samples < 1) {
    fail_validation("frame length and hop must be at least one sample");
  }
  const std::size_t n = w.samples.size();
  const std::size_t n_frames = n < len ? 0 : (n - len) / hop_samples + 1;
  const auto win = make_window(len, window);
  Matrix frames(n_frames, len);
  for (std::size_t f = 0; f < n_frames; ++f)
    for (std::size_t i = 0; i < len; ++i) {
      frames(f, i) = w.samples[f * hop_samples + i] * win[i];
    }
  return frames;
}

// ---- mel filterbank ----

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MelConfig {
  int sample_rate = 16000;
  double fps = 81.5;
  std::size_t n_fft = 512;
  std::size_t n_mels = kMelBands;
  double fmin = 0.0;
  double fmax = -1.0;  // negative: Nyquist
  double log_floor = 1e-10;

  double effective_fmax() const { return fmax < 0.0 ? sample_rate / 2.0 : fmax; }
  // Mel frames are synchronous with ultrasound frames.
  std::size_t hop() const {
    return static_cast<std::size_t>(std::lround(sample_rate / fps));
  }
};

struct MelFilterbank {
  Matrix weights;                 // [n_mels x n_fft/2+1]
  std::vector<double> edges_hz;   // n_mels + 2 triangle corner frequencies

  double center_hz(std::size_t band) const { return edges_hz[band + 1]; }
};

/// HTK-mel triangular filters with unit peak, evaluated at FFT bin centres.
inline MelFilterbank mel_filterbank(const MelConfig& cfg) {
  const double fmax = cfg.effective_fmax();
  if (fmax > cfg.sample_rate / 2.0 + 1e-9) {
    fail_validation("fmax ", fmax, " Hz exceeds Nyquist ", cfg.sample_rate / 2.0, " Hz");
  }
  if (cfg.fmin < 0.0 || cfg.fmin >= fmax) fail_validation("need 0 <= fmin < fmax");
  if (cfg.n_mels < 1) fail_validation("n_mels must be >= 1");
  const std::size_t bins = cfg.n_fft / 2 + 1;
  MelFilterbank fb{Matrix(cfg.n_mels, bins), {}};
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(fmax);
  for (std::size_t i = 0; i < cfg.n_mels + 2; ++i) {
    fb.edges_hz.push_back(mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1)));
  }
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double l = fb.edges_hz[m], c = fb.edges_hz[m + 1], r = fb.edges_hz[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      double v = 0.0;
      if (f > l && f <= c) v = (f - l) / (c - l);
      else if (f > c && f < r) v = (r - f) / (r - c);
      fb.weights(m, k) = v;
    }
  }
  return fb;
}

// ---- mel spectrogram ----

struct MelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct MelTrack {
  Matrix frames;  // [n_frames x n_mels], natural-log mel power
  double fps = 81.5;
  bool standardized = false;
  MelStats stats;  // the stats that were applied, when standardized

  std::size_t n_frames() const noexcept { return frames.rows; }
  std::size_t n_mels() const noexcept { return frames.cols; }
};

inline MelTrack melspectrogram(const Waveform& w, const MelConfig& cfg = {}) {
  const std::size_t hop = cfg.hop();
  if (cfg.n_fft < hop) fail_validation("n_fft ", cfg.n_fft, " smaller than hop ", hop);
  const auto fb = mel_filterbank(cfg);
  Stft stft(cfg.n_fft, hop);
  const Matrix power = stft.power(w.samples);
  MelTrack m{Matrix(power.rows, cfg.n_mels), cfg.fps, false, {}};
  for (std::size_t f = 0; f < power.rows; ++f) {
    for (std::size_t b = 0; b < cfg.n_mels; ++b) {
      double e = 0.0;
      const auto wrow = fb.weights.row(b);
      const auto prow = power.row(f);
      for (std::size_t k = 0; k < wrow.size(); ++k) e += wrow[k] * prow[k];
      m.frames(f, b) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return m;
}

// ---- standardization ----

inline constexpr double kMinStddev = 1e-8;

/// Per-band mean/stddev over every frame of every track.
inline MelStats compute_stats(std::span<const MelTrack> tracks) {
  if (tracks.empty()) fail_validation("no tracks to compute statistics from");
  const std::size_t bands = tracks.front().n_mels();
  MelStats s{std::vector<double>(bands, 0.0), std::vector<double>(bands, 0.0)};
  std::size_t n = 0;
  for (const auto& t : tracks) {
    if (t.n_mels() != bands) fail_validation("mel band count differs between tracks");
    for (std::size_t f = 0; f < t.n_frames(); ++f) {
      for (std::size_t b = 0; b < bands; ++b) s.mean[b] += t.frames(f, b);
    }
    n += t.n_frames();
  }
  if (n == 0) fail_validation("no frames to compute statistics from");
  for (double& v : s.mean) v /= static_cast<double>(n);
  for (const auto& t : tracks) {
    for (std::size_t f = 0; f < t.n_frames(); ++f) {
      for (std::size_t b = 0; b < bands; ++b) {
        const double d = t.frames(f, b) - s.mean[b];
        s.stddev[b] += d * d;
      }
    }
  }
  std::size_t floored = 0;
  for (double& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < kMinStddev) {
      v = kMinStddev;
      ++floored;
    }
  }
  if (floored) warn(floored, " mel band(s) have zero variance; stddev floored at 1e-8");
  return s;
}

/// Zero-mean unit-variance per band. Without explicit stats, the track's own
/// statistics are used.
inline MelTrack standardize(const MelTrack& m, const std::optional<MelStats>& stats = {}) {
  if (m.standardized) fail_validation("mel track is already standardized");
  MelTrack out = m;
  out.stats = stats ? *stats : compute_stats(std::span<const MelTrack>(&m, 1));
  if (out.stats.mean.size() != m.n_mels()) {
    fail_validation("stats have ", out.stats.mean.size(), " bands, track has ", m.n_mels());
  }
  for (std::size_t f = 0; f < m.n_frames(); ++f)
    for (std::size_t b = 0; b < m.n_mels(); ++b) {
      out.frames(f, b) = (m.frames(f, b) - out.stats.mean[b]) / out.stats.stddev[b];
    }
  out.standardized = true;
  return out;
}

inline MelTrack destandardize(const MelTrack& m) {
  if (!m.standardized) fail_validation("mel track is not standardized");
  MelTrack out = m;
  for (std::size_t f = 0; f < m.n_frames(); ++f)
    for (std::size_t b = 0; b < m.n_mels(); ++b) {
      out.frames(f, b) = m.frames(f, b) * m.stats.stddev[b] + m.stats.mean[b];
    }
  out.standardized = false;
  return out;
}

// ---- mel cepstra and MCD ----

struct CepstraTrack {
  Matrix frames;  // [n_frames x (D+1)], c0..cD
};

/// Orthonormal DCT-II over the log-mel bands, keeping c0..c(n_coeffs-1).
inline CepstraTrack mel_cepstra(const MelTrack& m, std::size_t n_coeffs = kCepstra) {
  if (m.standardized) fail_validation("mel_cepstra expects raw log-mel values");
  if (n_coeffs < 2 || n_coeffs > m.n_mels()) {
    fail_validation("n_coeffs must be in [2, ", m.n_mels(), "]");
  }
  const std::size_t N = m.n_mels();
  Matrix basis(n_coeffs, N);
  for (std::size_t k = 0; k < n_coeffs; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(N));
    for (std::size_t n = 0; n < N; ++n) {
      basis(k, n) = scale * std::cos(std::numbers::pi * (n + 0.5) * k / static_cast<double>(N));
    }
  }
  CepstraTrack c{Matrix(m.n_frames(), n_coeffs)};
  for (std::size_t f = 0; f < m.n_frames(); ++f)
    for (std::size_t k = 0; k < n_coeffs; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) s += basis(k, n) * m.frames(f, n);
      c.frames(f, k) = s;
    }
  return c;
}

/// Mean over frames of (10/ln10) * sqrt(2 * sum_{d>=1} (ref_d - est_d)^2), in
/// dB. c0 (energy) is excluded. `mask`, when given, selects the frames to
/// average over.
inline double mcd(const CepstraTrack& ref, const CepstraTrack& est,
                  const std::optional<std::vector<int>>& mask = {}) {
  if (ref.frames.rows != est.frames.rows) {
    fail_validation("MCD frame count mismatch: ", ref.frames.rows, " vs ", est.frames.rows);
  }
  if (ref.frames.cols != est.frames.cols) fail_validation("MCD coefficient count mismatch");
  if (mask && mask->size() != ref.frames.rows) {
    fail_validation("MCD mask length ", mask->size(), " differs from frame count ",
                    ref.frames.rows);
  }
  const double k = 10.0 / std::numbers::ln10;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < ref.frames.rows; ++f) {
    if (mask && !(*mask)[f]) continue;
    double s = 0.0;
    for (std::size_t d = 1; d < ref.frames.cols; ++d) {
      const double diff = ref.frames(f, d) - est.frames(f, d);
      s += diff * diff;
    }
    total += k * std::sqrt(2.0 * s);
    ++used;
  }
  if (used == 0) fail_validation("MCD over an empty frame selection");
  return total / static_cast<double>(used);
}

}  // namespace utivad::dsp
