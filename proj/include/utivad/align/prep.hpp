#pragma once

// Frame-level alignment of audio VAD decisions with ultrasound frames, image
// preprocessing, and windowing for the sequence regression networks.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "utivad/align/uti.hpp"
#include "utivad/core/log.hpp"
#include "utivad/core/tensor.hpp"
#include "utivad/vad/speech_vad.hpp"

namespace utivad::align {

struct LabelTrack {
  std::vector<int> labels;             // 1 = speech
  std::vector<double> probabilities;   // empty unless produced by a classifier
  double threshold = 0.5;

  std::size_t size() const noexcept { return labels.size(); }

  static LabelTrack from_probabilities(std::vector<double> p, double threshold = 0.5) {
    LabelTrack t;
    t.labels.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] >= 0.0 && p[i] <= 1.0)) fail_validation("probability ", p[i], " outside [0,1]");
      t.labels[i] = p[i] >= threshold;
    }
    t.probabilities = std::move(p);
    t.threshold = threshold;
    return t;
  }
};

/// Ultrasound frame i spans [i/fps, (i+1)/fps) on the ultrasound clock; the
/// audio clock is offset by audio_offset_s. Each frame takes the label with
/// the larger total overlap among the VAD frames it touches (ties go to
/// speech). Time not covered by the track counts as silence.
inline LabelTrack labels_from_vad(const vad::VadTrack& track, double fps_uti,
                                  long n_uti_frames, double audio_offset_s = 0.0) {
  if (n_uti_frames <= 0) fail_validation("n_uti_frames must be positive, got ", n_uti_frames);
  if (!(fps_uti > 0.0)) fail_validation("fps must be positive");
  const double dt = track.frame_ms / 1000.0;
  const long n_vad = static_cast<long>(track.n_frames());
  LabelTrack out;
  out.labels.resize(static_cast<std::size_t>(n_uti_frames));
  for (long i = 0; i < n_uti_frames; ++i) {
    const double a = i / fps_uti + audio_offset_s;
    const double b = (i + 1) / fps_uti + audio_offset_s;
    double speech = 0.0;
    for (long j = std::max(0L, static_cast<long>(std::floor(a / dt)));
         j < n_vad && j * dt < b; ++j) {
      if (!track.decisions[static_cast<std::size_t>(j)]) continue;
      speech += std::min(b, (j + 1) * dt) - std::max(a, j * dt);
    }
    out.labels[static_cast<std::size_t>(i)] = speech >= (b - a) - speech;
  }
  return out;
}

// ---- image preprocessing ----

/// Maps the image linearly onto [-1, 1]; a constant image becomes all zeros.
inline std::vector<double> minmax_normalize(std::span<const float> img) {
  std::vector<double> out(img.size(), 0.0);
  if (img.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  const double range = static_cast<double>(*hi) - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = 2.0 * (img[i] - *lo) / range - 1.0;
  return out;
}

inline double cubic_kernel(double x, double a = -0.5) {
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Taps {
  std::vector<std::array<long, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

// Pixel-centre aligned source positions with edge clamping.
inline Taps cubic_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.index.resize(out);
  t.weight.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    const long base = static_cast<long>(std::floor(src)) - 1;
    for (int k = 0; k < 4; ++k) {
      t.index[o][k] = std::clamp(base + k, 0L, static_cast<long>(in) - 1);
      t.weight[o][k] = cubic_kernel(src - static_cast<double>(base + k));
    }
  }
  return t;
}

}  // namespace detail

/// Separable bicubic (Catmull-Rom) resize of a row-major H x W image.
inline std::vector<double> bicubic_resize(std::span<const double> img, std::size_t H,
                                          std::size_t W, std::size_t out_h, std::size_t out_w) {
  if (H < 2 || W < 2) fail_validation("bicubic_resize needs at least 2x2 input, got ", H, "x", W);
  if (img.size() != H * W) fail_dimension("image has ", img.size(), " pixels, expected ", H * W);
  if (out_h == 0 || out_w == 0) fail_validation("output size must be positive");
  const auto tx = detail::cubic_taps(W, out_w);
  const auto ty = detail::cubic_taps(H, out_h);
  std::vector<double> rows(H * out_w);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < out_w; ++x) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += tx.weight[x][k] * img[y * W + tx.index[x][k]];
      rows[y * out_w + x] = s;
    }
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += ty.weight[y][k] * rows[ty.index[y][k] * out_w + x];
      out[y * out_w + x] = s;
    }
  return out;
}

/// Normalizes then resizes every frame, giving an f32 sequence of out_h x out_w.
inline UtiSequence prepare_sequence(const UtiSequence& seq, std::size_t out_h,
                                    std::size_t out_w) {
  UtiSequence out(seq.n_frames(), out_h, out_w, seq.fps(), PixelType::f32);
  for (std::size_t i = 0; i < seq.n_frames(); ++i) {
    const auto norm = minmax_normalize(seq.frame(i));
    const auto resized = bicubic_resize(norm, seq.height(), seq.width(), out_h, out_w);
    std::copy(resized.begin(), resized.end(), out.frame(i).begin());
  }
  return out;
}

/// A single frame as a [H, W, 1] tensor.
inline Tensor frame_tensor(const UtiSequence& seq, std::size_t i) {
  const auto f = seq.frame(i);
  return Tensor({seq.height(), seq.width(), 1}, std::vector<double>(f.begin(), f.end()));
}

// ---- windows ----

struct Window {
  std::size_t start = 0;
  std::size_t center = 0;
};

inline std::vector<Window> make_windows(std::size_t n_frames, std::size_t len = 25,
                                        std::size_t stride = 1) {
  if (len == 0 || stride == 0) fail_validation("window length and stride must be positive");
  std::vector<Window> out;
  if (n_frames < len) {
    warn("sequence of ", n_frames, " frames is shorter than the window length ", len);
    return out;
  }
  for (std::size_t s = 0; s + len <= n_frames; s += stride) out.push_back({s, s + len / 2});
  return out;
}

/// The frames of a window as a [len, H, W, 1] tensor.
inline Tensor window_tensor(const UtiSequence& seq, const Window& w, std::size_t len) {
  if (w.start + len > seq.n_frames()) fail_validation("window runs past the sequence end");
  const auto data = seq.data().subspan(w.start * seq.frame_size(), len * seq.frame_size());
  return Tensor({len, seq.height(), seq.width(), 1}, std::vector<double>(data.begin(), data.end()));
}

// ---- silence filtering ----

enum class SilenceMode { remove_silence, keep_padded };

inline std::size_t padding_frames(double fps, double pad_ms = 180.0) {
  return static_cast<std::size_t>(std::ceil(pad_ms / 1000.0 * fps - 1e-9));
}

/// Frames to keep: speech frames, plus (keep_padded) silence frames within
/// pad_ms of a speech frame.
inline std::vector<int> keep_mask(const std::vector<int>& labels, SilenceMode mode, double fps,
                                  double pad_ms = 180.0) {
  std::vector<int> keep(labels.begin(), labels.end());
  if (mode == SilenceMode::remove_silence) return keep;
  const long pad = static_cast<long>(padding_frames(fps, pad_ms));
  const long n = static_cast<long>(labels.size());
  for (long i = 0; i < n; ++i) {
    if (!labels[static_cast<std::size_t>(i)]) continue;
    for (long j = std::max(0L, i - pad); j <= std::min(n - 1, i + pad); ++j) {
      keep[static_cast<std::size_t>(j)] = 1;
    }
  }
  return keep;
}

/// Keeps the windows whose centre frame survives the silence mode.
inline std::vector<Window> filter_windows(const std::vector<Window>& windows,
                                          const std::vector<int>& labels, SilenceMode mode,
                                          double fps) {
  const auto keep = keep_mask(labels, mode, fps);
  std::vector<Window> out;
  for (const auto& w : windows) {
    if (w.center >= keep.size()) fail_validation("window centre beyond the label track");
    if (keep[w.center]) out.push_back(w);
  }
  return out;
}

}  // namespace utivad::align
