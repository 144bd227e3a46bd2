#pragma once

// Stateless forward/backward kernels for the fixed layer set. Layouts are
// channels-last: images are [H,W,C], clips are [T,H,W,C]; conv kernels are
// [kt,kh,kw,Cin,Cout]. Convolutions run as single-threaded Eigen matrix
// products, whose reduction order depends only on the operand shapes, so
// results are bitwise reproducible for a given build.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "utivad/core/tensor.hpp"

namespace utivad::nn {

enum class Padding { same, valid };

struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

// Keras convention for "same": out = ceil(in/stride), the odd extra padding
// cell goes after (bottom/right).
inline AxisGeometry axis_geometry(std::size_t in, std::size_t kernel,
                                  std::size_t stride, Padding padding,
                                  const char* axis) {
  if (kernel < 1) fail_dimension("kernel size on axis ", axis, " must be >= 1");
  if (stride < 1) fail_dimension("stride on axis ", axis, " must be >= 1");
  AxisGeometry g;
  if (padding == Padding::same) {
    g.out = (in + stride - 1) / stride;
    const std::size_t needed = (g.out - 1) * stride + kernel;
    g.pad_before = needed > in ? (needed - in) / 2 : 0;
  } else {
    if (kernel > in) {
      fail_dimension("kernel size ", kernel, " exceeds input size ", in,
                     " on axis ", axis, " (valid padding)");
    }
    g.out = (in - kernel) / stride + 1;
  }
  return g;
}

struct Conv3dGeometry {
  std::size_t t_in, h_in, w_in, c_in;
  std::size_t kt, kh, kw, c_out;
  std::array<std::size_t, 3> stride;
  AxisGeometry t, h, w;
};

inline Conv3dGeometry conv3d_geometry(const Shape& input, const Shape& kernels,
                                      std::array<std::size_t, 3> stride,
                                      Padding space_padding) {
  if (input.size() != 4) {
    fail_dimension("conv3d input must be rank 4 [T,H,W,C], got ",
                   shape_str(input));
  }
  if (kernels.size() != 5) {
    fail_dimension("conv3d kernels must be rank 5 [kt,kh,kw,Cin,Cout], got ",
                   shape_str(kernels));
  }
  if (kernels[3] != input[3]) {
    fail_dimension("channel axis mismatch: input has ", input[3],
                   " channels, kernels expect ", kernels[3]);
  }
  Conv3dGeometry g{input[0],  input[1],   input[2], input[3], kernels[0],
                   kernels[1], kernels[2], kernels[4], stride, {}, {}, {}};
  g.t = axis_geometry(g.t_in, g.kt, stride[0], Padding::valid, "time");
  g.h = axis_geometry(g.h_in, g.kh, stride[1], space_padding, "height");
  g.w = axis_geometry(g.w_in, g.kw, stride[2], space_padding, "width");
  return g;
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;

namespace detail {

/// Visits, for every output cell (row) and kernel tap (dt, dy), the run of
/// kernel columns dx in [dx0, dx1) that fall inside the input. The run is
/// contiguous in both the input and the patch row.
template <typename F>
void for_each_patch_run(const Conv3dGeometry& g, F&& f) {
  const auto h_in = static_cast<std::ptrdiff_t>(g.h_in);
  const auto w_in = static_cast<std::ptrdiff_t>(g.w_in);
  std::size_t row = 0;
  for (std::size_t ot = 0; ot < g.t.out; ++ot)
    for (std::size_t oy = 0; oy < g.h.out; ++oy)
      for (std::size_t ox = 0; ox < g.w.out; ++ox, ++row) {
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * g.stride[2]) -
                                  static_cast<std::ptrdiff_t>(g.w.pad_before);
        const auto dx0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -x0));
        const auto dx1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(w_in - x0, 0, static_cast<std::ptrdiff_t>(g.kw)));
        if (dx0 >= dx1) continue;
        for (std::size_t dt = 0; dt < g.kt; ++dt) {
          const std::size_t it = ot * g.stride[0] + dt;
          for (std::size_t dy = 0; dy < g.kh; ++dy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride[1] + dy) -
                                      static_cast<std::ptrdiff_t>(g.h.pad_before);
            if (iy < 0 || iy >= h_in) continue;
            const std::size_t in_off =
                ((it * g.h_in + static_cast<std::size_t>(iy)) * g.w_in +
                 static_cast<std::size_t>(x0 + static_cast<std::ptrdiff_t>(dx0))) * g.c_in;
            const std::size_t col = ((dt * g.kh + dy) * g.kw + dx0) * g.c_in;
            f(row, col, in_off, (dx1 - dx0) * g.c_in);
          }
        }
      }
}

/// Row r of the patch matrix holds the receptive field of output cell r in
/// kernel order [kt,kh,kw,Cin]; padding cells are zero.
inline RowMajorMatrix im2col(const Tensor& input, const Conv3dGeometry& g) {
  const std::size_t kdim = g.kt * g.kh * g.kw * g.c_in;
  RowMajorMatrix p = RowMajorMatrix::Zero(
      static_cast<Eigen::Index>(g.t.out * g.h.out * g.w.out), static_cast<Eigen::Index>(kdim));
  const double* in = input.ptr();
  double* dst = p.data();
  for_each_patch_run(g, [&](std::size_t row, std::size_t col, std::size_t in_off, std::size_t n) {
    std::copy_n(in + in_off, n, dst + row * kdim + col);
  });
  return p;
}

/// Scatter-adds patch-matrix gradients back onto the input grid.
inline void col2im(const RowMajorMatrix& p, const Conv3dGeometry& g, double* grad_in) {
  const std::size_t kdim = g.kt * g.kh * g.kw * g.c_in;
  const double* src = p.data();
  for_each_patch_run(g, [&](std::size_t row, std::size_t col, std::size_t in_off, std::size_t n) {
    const double* s = src + row * kdim + col;
    double* d = grad_in + in_off;
    for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
  });
}

}  // namespace detail

/// Channels-last 3D convolution: valid along time, `space_padding` along
/// height and width. Evaluated as patch matrix x kernel matrix.
inline Tensor conv3d(const Tensor& input, const Tensor& kernels,
                     const Tensor& bias, std::array<std::size_t, 3> stride,
                     Padding space_padding) {
  const auto g = conv3d_geometry(input.shape(), kernels.shape(), stride,
                                 space_padding);
  if (bias.size() != g.c_out) {
    fail_dimension("bias length ", bias.size(), " does not match output channels ",
                   g.c_out);
  }
  const auto kdim = static_cast<Eigen::Index>(g.kt * g.kh * g.kw * g.c_in);
  const auto co = static_cast<Eigen::Index>(g.c_out);
  const RowMajorMatrix p = detail::im2col(input, g);
  Tensor out({g.t.out, g.h.out, g.w.out, g.c_out});
  MatrixMap o(out.ptr(), p.rows(), co);
  o.noalias() = p * ConstMatrixMap(kernels.ptr(), kdim, co);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.ptr(), co);
  return out;
}

/// Accumulates (+=) into grad_kernels and grad_bias; overwrites grad_input
/// when it is non-null.
inline void conv3d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& grad_out,
                            std::array<std::size_t, 3> stride,
                            Padding space_padding, Tensor* grad_input,
                            Tensor& grad_kernels, Tensor& grad_bias) {
  const auto g = conv3d_geometry(input.shape(), kernels.shape(), stride,
                                 space_padding);
  if (grad_out.shape() != Shape{g.t.out, g.h.out, g.w.out, g.c_out}) {
    fail_dimension("conv3d grad_out shape ", shape_str(grad_out.shape()),
                   " does not match forward output");
  }
  const auto kdim = static_cast<Eigen::Index>(g.kt * g.kh * g.kw * g.c_in);
  const auto co = static_cast<Eigen::Index>(g.c_out);
  const RowMajorMatrix p = detail::im2col(input, g);
  ConstMatrixMap go(grad_out.ptr(), p.rows(), co);
  MatrixMap(grad_kernels.ptr(), kdim, co).noalias() += p.transpose() * go;
  Eigen::Map<Eigen::RowVectorXd>(grad_bias.ptr(), co) += go.colwise().sum();
  if (grad_input) {
    *grad_input = Tensor(input.shape());
    const RowMajorMatrix gp = go * ConstMatrixMap(kernels.ptr(), kdim, co).transpose();
    detail::col2im(gp, g, grad_input->ptr());
  }
}

/// 2D convolution on [H,W,Cin] with kernels [kh,kw,Cin,Cout]; evaluated as a
/// single-frame 3D convolution.
inline Tensor conv2d(const Tensor& input, const Tensor& kernels,
                     const Tensor& bias, std::array<std::size_t, 2> stride,
                     Padding padding) {
  if (input.rank() != 3) {
    fail_dimension("conv2d input must be rank 3 [H,W,C], got ",
                   shape_str(input.shape()));
  }
  if (kernels.rank() != 4) {
    fail_dimension("conv2d kernels must be rank 4 [kh,kw,Cin,Cout], got ",
                   shape_str(kernels.shape()));
  }
  const auto& is = input.shape();
  const auto& ks = kernels.shape();
  Tensor out = conv3d(input.reshaped({1, is[0], is[1], is[2]}),
                      kernels.reshaped({1, ks[0], ks[1], ks[2], ks[3]}), bias,
                      {1, stride[0], stride[1]}, padding);
  const auto os = out.shape();
  return out.reshaped({os[1], os[2], os[3]});
}

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Max pooling over [T,H,W,C] with stride == window and floor semantics.
inline PoolResult maxpool3d(const Tensor& input,
                            std::array<std::size_t, 3> window) {
  if (input.rank() != 4) {
    fail_dimension("maxpool3d input must be rank 4 [T,H,W,C], got ",
                   shape_str(input.shape()));
  }
  static constexpr const char* kAxis[3] = {"time", "height", "width"};
  std::array<std::size_t, 3> out_dims{};
  for (int a = 0; a < 3; ++a) {
    if (window[a] < 1) fail_dimension("pool window on axis ", kAxis[a], " must be >= 1");
    if (window[a] > input.dim(a)) {
      fail_dimension("pool window ", window[a], " larger than input size ",
                     input.dim(a), " on axis ", kAxis[a]);
    }
    out_dims[a] = input.dim(a) / window[a];
  }
  const std::size_t T = input.dim(0), H = input.dim(1), W = input.dim(2),
                    C = input.dim(3);
  (void)T;
  PoolResult r{Tensor({out_dims[0], out_dims[1], out_dims[2], C}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t ot = 0; ot < out_dims[0]; ++ot)
    for (std::size_t oy = 0; oy < out_dims[1]; ++oy)
      for (std::size_t ox = 0; ox < out_dims[2]; ++ox)
        for (std::size_t c = 0; c < C; ++c, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          for (std::size_t dt = 0; dt < window[0]; ++dt)
            for (std::size_t dy = 0; dy < window[1]; ++dy)
              for (std::size_t dx = 0; dx < window[2]; ++dx) {
                const std::size_t i =
                    (((ot * window[0] + dt) * H + oy * window[1] + dy) * W +
                     ox * window[2] + dx) * C + c;
                if (input[i] > best) {
                  best = input[i];
                  best_i = i;
                }
              }
          r.output[o] = best;
          r.argmax[o] = best_i;
        }
  return r;
}

inline PoolResult maxpool2d(const Tensor& input,
                            std::array<std::size_t, 2> window) {
  if (input.rank() != 3) {
    fail_dimension("maxpool2d input must be rank 3 [H,W,C], got ",
                   shape_str(input.shape()));
  }
  const auto& s = input.shape();
  PoolResult r = maxpool3d(input.reshaped({1, s[0], s[1], s[2]}),
                           {1, window[0], window[1]});
  const auto os = r.output.shape();
  r.output = r.output.reshaped({os[1], os[2], os[3]});
  return r;
}

/// y = b + x·W with x:[n], W:[n,m], b:[m].
inline Tensor dense(const Tensor& input, const Tensor& weights,
                    const Tensor& bias) {
  if (weights.rank() != 2) {
    fail_dimension("dense weights must be rank 2 [n,m], got ",
                   shape_str(weights.shape()));
  }
  const std::size_t n = weights.dim(0), m = weights.dim(1);
  if (input.size() != n) {
    fail_dimension("dense input length ", input.size(),
                   " does not match weight rows ", n);
  }
  if (bias.size() != m) {
    fail_dimension("dense bias length ", bias.size(),
                   " does not match weight columns ", m);
  }
  Tensor out({m});
  double* y = out.ptr();
  for (std::size_t j = 0; j < m; ++j) y[j] = bias[j];
  const double* w = weights.ptr();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = input[i];
    const double* row = w + i * m;
    for (std::size_t j = 0; j < m; ++j) y[j] += v * row[j];
  }
  return out;
}

enum class Activation { linear, relu, sigmoid };

// Split form: never evaluates exp of a positive argument.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor activate(const Tensor& x, Activation kind) {
  Tensor y = x;
  switch (kind) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::sigmoid:
      for (double& v : y.data()) v = sigmoid(v);
      break;
  }
  return y;
}

}  // namespace utivad::nn
