#pragma once

// Brute-force reference evaluations used as independent oracles. None of
// these call into the library's kernels; they index tensors element by
// element with the textbook formulas.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "utivad/core/tensor.hpp"

namespace oracle {

using utivad::Shape;
using utivad::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline long same_pad_before(long in, long k, long s) {
  const long out = (in + s - 1) / s;
  const long total = std::max((out - 1) * s + k - in, 0L);
  return total / 2;
}

// Direct sum over [H,W,Cin] x [kh,kw,Cin,Cout].
inline Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, long sh,
                     long sw, bool same) {
  const long H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const long kh = k.dim(0), kw = k.dim(1), Co = k.dim(3);
  long OH, OW, ph = 0, pw = 0;
  if (same) {
    OH = (H + sh - 1) / sh;
    OW = (W + sw - 1) / sw;
    ph = same_pad_before(H, kh, sh);
    pw = same_pad_before(W, kw, sw);
  } else {
    OH = (H - kh) / sh + 1;
    OW = (W - kw) / sw + 1;
  }
  Tensor y({static_cast<std::size_t>(OH), static_cast<std::size_t>(OW),
            static_cast<std::size_t>(Co)});
  for (long oy = 0; oy < OH; ++oy)
    for (long ox = 0; ox < OW; ++ox)
      for (long co = 0; co < Co; ++co) {
        double s = b[co];
        for (long i = 0; i < kh; ++i)
          for (long j = 0; j < kw; ++j)
            for (long ci = 0; ci < C; ++ci) {
              const long iy = oy * sh + i - ph, ix = ox * sw + j - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              s += x.at(iy, ix, ci) * k.at(i, j, ci, co);
            }
        y.at(oy, ox, co) = s;
      }
  return y;
}

inline Tensor conv3d(const Tensor& x, const Tensor& k, const Tensor& b, long st,
                     long sh, long sw, bool same_space) {
  const long T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const long kt = k.dim(0), kh = k.dim(1), kw = k.dim(2), Co = k.dim(4);
  const long OT = (T - kt) / st + 1;
  long OH, OW, ph = 0, pw = 0;
  if (same_space) {
    OH = (H + sh - 1) / sh;
    OW = (W + sw - 1) / sw;
    ph = same_pad_before(H, kh, sh);
    pw = same_pad_before(W, kw, sw);
  } else {
    OH = (H - kh) / sh + 1;
    OW = (W - kw) / sw + 1;
  }
  Tensor y({static_cast<std::size_t>(OT), static_cast<std::size_t>(OH),
            static_cast<std::size_t>(OW), static_cast<std::size_t>(Co)});
  for (long ot = 0; ot < OT; ++ot)
    for (long oy = 0; oy < OH; ++oy)
      for (long ox = 0; ox < OW; ++ox)
        for (long co = 0; co < Co; ++co) {
          double s = b[co];
          for (long a = 0; a < kt; ++a)
            for (long i = 0; i < kh; ++i)
              for (long j = 0; j < kw; ++j)
                for (long ci = 0; ci < C; ++ci) {
                  const long iy = oy * sh + i - ph, ix = ox * sw + j - pw;
                  if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                  s += x.at(ot * st + a, iy, ix, ci) * k.at(a, i, j, ci, co);
                }
          y.at(ot, oy, ox, co) = s;
        }
  return y;
}

inline Tensor maxpool2d(const Tensor& x, long ph, long pw) {
  const long OH = x.dim(0) / ph, OW = x.dim(1) / pw, C = x.dim(2);
  Tensor y({static_cast<std::size_t>(OH), static_cast<std::size_t>(OW),
            static_cast<std::size_t>(C)});
  for (long oy = 0; oy < OH; ++oy)
    for (long ox = 0; ox < OW; ++ox)
      for (long c = 0; c < C; ++c) {
        double m = -1e300;
        for (long i = 0; i < ph; ++i)
          for (long j = 0; j < pw; ++j) m = std::max(m, x.at(oy * ph + i, ox * pw + j, c));
        y.at(oy, ox, c) = m;
      }
  return y;
}

inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y({w.dim(1)});
  for (std::size_t j = 0; j < w.dim(1); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.dim(0); ++i) s += x[i] * w.at(i, j);
    y[j] = s + b[j];
  }
  return y;
}

inline double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One LSTM direction, unrolled step by step with explicit per-gate sums.
// kernel [F,4U], recurrent [U,4U], bias [4U]; gates i,f,c,o.
inline std::vector<double> lstm_final_h(const Tensor& x, const Tensor& kernel,
                                        const Tensor& rec, const Tensor& bias,
                                        std::size_t U, bool reverse) {
  const std::size_t T = x.dim(0), F = x.dim(1);
  std::vector<double> h(U, 0.0), c(U, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> hn(U), cn(U);
    for (std::size_t u = 0; u < U; ++u) {
      double z[4];
      for (int gate = 0; gate < 4; ++gate) {
        const std::size_t col = gate * U + u;
        double acc = bias[col];
        for (std::size_t f = 0; f < F; ++f) acc += x.at(t, f) * kernel.at(f, col);
        for (std::size_t v = 0; v < U; ++v) acc += h[v] * rec.at(v, col);
        z[gate] = acc;
      }
      const double ig = sig(z[0]), fg = sig(z[1]), cg = std::tanh(z[2]), og = sig(z[3]);
      cn[u] = fg * c[u] + ig * cg;
      hn[u] = og * std::tanh(cn[u]);
    }
    h = hn;
    c = cn;
  }
  return h;
}

// Orthonormal DCT-II by direct summation.
inline std::vector<double> dct2_ortho(const std::vector<double>& v, std::size_t keep) {
  const std::size_t N = v.size();
  std::vector<double> out(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      s += v[n] * std::cos(M_PI / N * (n + 0.5) * k);
    }
    out[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / N);
  }
  return out;
}

inline double catmull_rom(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x < 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
  if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
  return 0.0;
}

// Per output pixel: 4x4 taps around the pixel-center-aligned source
// coordinate, clamped at the borders.
inline std::vector<double> bicubic(const std::vector<double>& img, long H, long W,
                                   long OH, long OW) {
  std::vector<double> out(OH * OW);
  for (long oy = 0; oy < OH; ++oy)
    for (long ox = 0; ox < OW; ++ox) {
      const double sy = (oy + 0.5) * H / static_cast<double>(OH) - 0.5;
      const double sx = (ox + 0.5) * W / static_cast<double>(OW) - 0.5;
      const long y0 = static_cast<long>(std::floor(sy));
      const long x0 = static_cast<long>(std::floor(sx));
      double s = 0.0;
      for (long i = -1; i <= 2; ++i)
        for (long j = -1; j <= 2; ++j) {
          const long yy = std::clamp(y0 + i, 0L, H - 1);
          const long xx = std::clamp(x0 + j, 0L, W - 1);
          s += img[yy * W + xx] * catmull_rom(sy - (y0 + i)) * catmull_rom(sx - (x0 + j));
        }
      out[oy * OW + ox] = s;
    }
  return out;
}

// Mann-Whitney by exhaustive pair enumeration.
inline double auc_pairs(const std::vector<int>& labels, const std::vector<double>& scores) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      den += 1.0;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  return num / den;
}

}  // namespace oracle
