#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "utivad/core/tensor.hpp"
#include "utivad/nn/ops.hpp"

namespace utivad::nn {

using Rng = std::mt19937_64;

enum class Mode { train, infer };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(shape) {}
};

inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                           Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data()) v = dist(rng);
}

/// A layer caches whatever its last forward call needs for backward. Models
/// run one sample at a time, so a single cache slot is enough.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const noexcept { return name_; }
  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
  // Accumulates parameter gradients and returns dL/dx.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual void init(Rng&) {}
  // Distance of the last forward pass from a non-differentiable point.
  virtual double kink_margin() const {
    return std::numeric_limits<double>::infinity();
  }
  // When false, backward may return zeros instead of dL/dx.
  void set_input_grad(bool on) noexcept { input_grad_ = on; }
  bool input_grad() const noexcept { return input_grad_; }

 private:
  std::string name_;
  bool input_grad_ = true;
};

class Conv3D : public Layer {
 public:
  Conv3D(std::string name, std::size_t in_channels, std::size_t filters,
         std::array<std::size_t, 3> kernel, std::array<std::size_t, 3> stride,
         Padding space_padding)
      : Layer(name),
        kernel_(name + "/kernel",
                {kernel[0], kernel[1], kernel[2], in_channels, filters}),
        bias_(name + "/bias", {filters}),
        stride_(stride),
        padding_(space_padding) {}

  std::string kind() const override { return "conv3d"; }

  Shape output_shape(const Shape& in) const override {
    const auto g = conv3d_geometry(in, kernel_.value.shape(), stride_, padding_);
    return {g.t.out, g.h.out, g.w.out, g.c_out};
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    input_ = x;
    return conv3d(x, kernel_.value, bias_.value, stride_, padding_);
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in(input_.shape());
    conv3d_backward(input_, kernel_.value, grad_out, stride_, padding_,
                    input_grad() ? &grad_in : nullptr, kernel_.grad, bias_.grad);
    return grad_in;
  }

  std::vector<Param*> params() override { return {&kernel_, &bias_}; }

  void init(Rng& rng) override {
    const auto& s = kernel_.value.shape();
    const std::size_t field = s[0] * s[1] * s[2];
    glorot_uniform(kernel_.value, field * s[3], field * s[4], rng);
    bias_.value.fill(0.0);
  }

 protected:
  Param kernel_;
  Param bias_;
  std::array<std::size_t, 3> stride_;
  Padding padding_;
  Tensor input_;
};

/// [H,W,C] convolution. Kernels are stored as [kh,kw,Cin,Cout].
class Conv2D : public Layer {
 public:
  Conv2D(std::string name, std::size_t in_channels, std::size_t filters,
         std::array<std::size_t, 2> kernel, std::array<std::size_t, 2> stride,
         Padding padding)
      : Layer(name),
        kernel_(name + "/kernel", {kernel[0], kernel[1], in_channels, filters}),
        bias_(name + "/bias", {filters}),
        stride_{1, stride[0], stride[1]},
        padding_(padding) {}

  std::string kind() const override { return "conv2d"; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3) {
      fail_dimension("conv2d input must be rank 3 [H,W,C], got ", shape_str(in));
    }
    const auto g = conv3d_geometry({1, in[0], in[1], in[2]}, kernel5().shape(),
                                   stride_, padding_);
    return {g.h.out, g.w.out, g.c_out};
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    if (x.rank() != 3) {
      fail_dimension("conv2d input must be rank 3 [H,W,C], got ",
                     shape_str(x.shape()));
    }
    const auto& s = x.shape();
    input_ = x.reshaped({1, s[0], s[1], s[2]});
    Tensor y = conv3d(input_, kernel5(), bias_.value, stride_, padding_);
    const auto& ys = y.shape();
    return y.reshaped({ys[1], ys[2], ys[3]});
  }

  Tensor backward(const Tensor& grad_out) override {
    const auto& gs = grad_out.shape();
    Tensor gk5(kernel5().shape());
    Tensor grad_in(input_.shape());
    conv3d_backward(input_, kernel5(), grad_out.reshaped({1, gs[0], gs[1], gs[2]}),
                    stride_, padding_, input_grad() ? &grad_in : nullptr, gk5, bias_.grad);
    auto g = kernel_.grad.data();
    auto d = gk5.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
    const auto& is = grad_in.shape();
    return grad_in.reshaped({is[1], is[2], is[3]});
  }

  std::vector<Param*> params() override { return {&kernel_, &bias_}; }

  void init(Rng& rng) override {
    const auto& s = kernel_.value.shape();
    glorot_uniform(kernel_.value, s[0] * s[1] * s[2], s[0] * s[1] * s[3], rng);
    bias_.value.fill(0.0);
  }

 private:
  Tensor kernel5() const {
    const auto& s = kernel_.value.shape();
    return kernel_.value.reshaped({1, s[0], s[1], s[2], s[3]});
  }

  Param kernel_;
  Param bias_;
  std::array<std::size_t, 3> stride_;
  Padding padding_;
  Tensor input_;
};

/// Max pooling on [H,W,C] (two window entries) or [T,H,W,C] (three).
class MaxPool : public Layer {
 public:
  MaxPool(std::string name, std::vector<std::size_t> window)
      : Layer(std::move(name)), window_(std::move(window)) {
    if (window_.size() != 2 && window_.size() != 3) {
      fail_validation("maxpool window must have 2 or 3 entries");
    }
  }

  std::string kind() const override {
    return window_.size() == 2 ? "maxpool2d" : "maxpool3d";
  }

  Shape output_shape(const Shape& in) const override {
    const std::size_t spatial = window_.size();
    if (in.size() != spatial + 1) {
      fail_dimension(kind(), " expects rank ", spatial + 1, " input, got ",
                     shape_str(in));
    }
    Shape out = in;
    for (std::size_t a = 0; a < spatial; ++a) {
      if (window_[a] > in[a]) {
        fail_dimension("pool window ", window_[a], " larger than input size ",
                       in[a], " on axis ", a);
      }
      out[a] = in[a] / window_[a];
    }
    return out;
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    in_shape_ = x.shape();
    PoolResult r = window_.size() == 2
                       ? maxpool2d(x, {window_[0], window_[1]})
                       : maxpool3d(x, {window_[0], window_[1], window_[2]});
    argmax_ = std::move(r.argmax);
    input_ = x;
    output_ = r.output;
    return std::move(r.output);
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor g(in_shape_);
    for (std::size_t o = 0; o < argmax_.size(); ++o) g[argmax_[o]] += grad_out[o];
    return g;
  }

  // Runner-up gap per window: a tie would make the max non-differentiable.
  double kink_margin() const override {
    std::size_t per_window = 1;
    for (std::size_t w : window_) per_window *= w;
    if (per_window <= 1 || argmax_.empty()) return std::numeric_limits<double>::infinity();
    return runner_up_gap(input_, output_);
  }

 private:
  double runner_up_gap(const Tensor& x, const Tensor& y) const {
    // Element-wise: for every input that lies inside a pooled window and is
    // not the argmax, its distance to the window max. Exact zeros tying a
    // zero max come from relu or dropout and do not move under perturbation.
    std::vector<char> is_max(x.size(), 0);
    for (std::size_t i : argmax_) is_max[i] = 1;
    const auto& s = x.shape();
    const bool three = window_.size() == 3;
    const std::size_t T = three ? s[0] : 1, H = s[three ? 1 : 0],
                      W = s[three ? 2 : 1], C = s[three ? 3 : 2];
    const std::size_t wt = three ? window_[0] : 1, wh = window_[three ? 1 : 0],
                      ww = window_[three ? 2 : 1];
    const std::size_t OT = T / wt, OH = H / wh, OW = W / ww;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < OT * wt; ++t)
      for (std::size_t yy = 0; yy < OH * wh; ++yy)
        for (std::size_t xx = 0; xx < OW * ww; ++xx)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = ((t * H + yy) * W + xx) * C + c;
            if (is_max[i]) continue;
            const std::size_t o = (((t / wt) * OH + yy / wh) * OW + xx / ww) * C + c;
            if (x[i] == 0.0 && y[o] == 0.0) continue;
            gap = std::min(gap, y[o] - x[i]);
          }
    return gap;
  }

  std::vector<std::size_t> window_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
  Tensor input_;
  Tensor output_;
};

class Dense : public Layer {
 public:
  Dense(std::string name, std::size_t in, std::size_t out)
      : Layer(name), weights_(name + "/kernel", {in, out}), bias_(name + "/bias", {out}) {}

  std::string kind() const override { return "dense"; }

  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) != weights_.value.dim(0) || in.size() != 1) {
      fail_dimension("dense layer ", name(), " expects input [",
                     weights_.value.dim(0), "], got ", shape_str(in));
    }
    return {weights_.value.dim(1)};
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    input_ = x;
    return dense(x, weights_.value, bias_.value);
  }

  Tensor backward(const Tensor& grad_out) override {
    const std::size_t n = weights_.value.dim(0), m = weights_.value.dim(1);
    Tensor grad_in({n});
    const double* w = weights_.value.ptr();
    double* gw = weights_.grad.ptr();
    const double* g = grad_out.ptr();
    for (std::size_t j = 0; j < m; ++j) bias_.grad[j] += g[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = input_[i];
      const double* row = w + i * m;
      double* grow = gw + i * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        s += row[j] * g[j];
        grow[j] += v * g[j];
      }
      grad_in[i] = s;
    }
    return grad_in;
  }

  std::vector<Param*> params() override { return {&weights_, &bias_}; }

  void init(Rng& rng) override {
    glorot_uniform(weights_.value, weights_.value.dim(0), weights_.value.dim(1), rng);
    bias_.value.fill(0.0);
  }

 private:
  Param weights_;
  Param bias_;
  Tensor input_;
};

class ActivationLayer : public Layer {
 public:
  ActivationLayer(std::string name, Activation kind)
      : Layer(std::move(name)), kind_(kind) {}

  std::string kind() const override {
    switch (kind_) {
      case Activation::relu: return "relu";
      case Activation::sigmoid: return "sigmoid";
      default: return "linear";
    }
  }
  Activation activation() const noexcept { return kind_; }

  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    input_ = x;
    output_ = activate(x, kind_);
    return output_;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor g = grad_out;
    switch (kind_) {
      case Activation::linear:
        break;
      case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (input_[i] <= 0.0) g[i] = 0.0;
        }
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] *= output_[i] * (1.0 - output_[i]);
        }
        break;
    }
    return g;
  }

  double kink_margin() const override {
    double m = std::numeric_limits<double>::infinity();
    if (kind_ == Activation::relu) {
      for (double v : input_.data()) m = std::min(m, std::abs(v));
    }
    return m;
  }

 private:
  Activation kind_;
  Tensor input_;
  Tensor output_;
};

/// Inverted dropout: kept units are scaled by 1/(1-rate) in train mode;
/// identity in infer mode.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      fail_validation("dropout rate must be in [0,1), got ", rate);
    }
  }

  std::string kind() const override { return "dropout"; }
  double rate() const noexcept { return rate_; }

  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override {
    if (mode == Mode::infer || rate_ == 0.0) {
      mask_ = Tensor();
      return x;
    }
    mask_ = Tensor(x.shape());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double scale = 1.0 / (1.0 - rate_);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      mask_[i] = u(rng) >= rate_ ? scale : 0.0;
      y[i] *= mask_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    if (mask_.empty()) return grad_out;
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
    return g;
  }

 private:
  double rate_;
  Tensor mask_;
};

class Reshape : public Layer {
 public:
  Reshape(std::string name, Shape target)
      : Layer(std::move(name)), target_(std::move(target)) {}

  std::string kind() const override { return "reshape"; }

  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) != shape_size(target_)) {
      fail_dimension("cannot reshape ", shape_str(in), " to ", shape_str(target_));
    }
    return target_;
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    in_shape_ = x.shape();
    return x.reshaped(target_);
  }

  Tensor backward(const Tensor& grad_out) override {
    return grad_out.reshaped(in_shape_);
  }

  const Shape& target() const noexcept { return target_; }

 private:
  Shape target_;
  Shape in_shape_;
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}

  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    in_shape_ = x.shape();
    return x.reshaped({x.size()});
  }
  Tensor backward(const Tensor& grad_out) override {
    return grad_out.reshaped(in_shape_);
  }

 private:
  Shape in_shape_;
};

/// Bidirectional LSTM over [T,F], returning the concatenation of the forward
/// direction's final hidden state and the backward direction's final hidden
/// state (after processing T-1 down to 0). Gate order in the packed 4U axis
/// is input, forget, candidate, output.
class BiLSTM : public Layer {
 public:
  BiLSTM(std::string name, std::size_t features, std::size_t units)
      : Layer(name),
        units_(units),
        features_(features),
        dirs_{Direction(name + "/forward", features, units),
              Direction(name + "/backward", features, units)} {}

  std::string kind() const override { return "bilstm"; }
  std::size_t units() const noexcept { return units_; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 2 || in[1] != features_) {
      fail_dimension("bilstm ", name(), " expects input [T,", features_,
                     "], got ", shape_str(in));
    }
    return {2 * units_};
  }

  Tensor forward(const Tensor& x, Mode, Rng&) override {
    if (x.rank() != 2 || x.dim(0) < 1) {
      fail_validation("bilstm needs a non-empty [T,F] sequence");
    }
    output_shape(x.shape());
    input_ = x;
    const std::size_t T = x.dim(0);
    Tensor out({2 * units_});
    for (int d = 0; d < 2; ++d) {
      auto& dir = dirs_[d];
      dir.steps.assign(T, Step(units_));
      std::vector<double> h(units_, 0.0), c(units_, 0.0);
      for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = d == 0 ? s : T - 1 - s;
        dir.run_step(x.ptr() + t * features_, h, c, dir.steps[s]);
        h = dir.steps[s].h;
        c = dir.steps[s].c;
      }
      for (std::size_t u = 0; u < units_; ++u) out[d * units_ + u] = h[u];
    }
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const std::size_t T = input_.dim(0);
    Tensor grad_in(input_.shape());
    for (int d = 0; d < 2; ++d) {
      auto& dir = dirs_[d];
      std::vector<double> dh(grad_out.ptr() + d * units_,
                             grad_out.ptr() + (d + 1) * units_);
      std::vector<double> dc(units_, 0.0);
      for (std::size_t s = T; s-- > 0;) {
        const std::size_t t = d == 0 ? s : T - 1 - s;
        dir.back_step(input_.ptr() + t * features_, dir.steps[s], dh, dc,
                      grad_in.ptr() + t * features_);
      }
    }
    return grad_in;
  }

  std::vector<Param*> params() override {
    return {&dirs_[0].kernel, &dirs_[0].recurrent, &dirs_[0].bias,
            &dirs_[1].kernel, &dirs_[1].recurrent, &dirs_[1].bias};
  }

  void init(Rng& rng) override {
    for (auto& dir : dirs_) {
      glorot_uniform(dir.kernel.value, features_, 4 * units_, rng);
      glorot_uniform(dir.recurrent.value, units_, 4 * units_, rng);
      dir.bias.value.fill(0.0);
      for (std::size_t u = 0; u < units_; ++u) dir.bias.value[units_ + u] = 1.0;
    }
  }

 private:
  struct Step {
    explicit Step(std::size_t u)
        : i(u), f(u), g(u), o(u), c(u), tanh_c(u), h(u), h_prev(u), c_prev(u) {}
    std::vector<double> i, f, g, o, c, tanh_c, h, h_prev, c_prev;
  };

  struct Direction {
    Direction(const std::string& prefix, std::size_t features, std::size_t units)
        : kernel(prefix + "/kernel", {features, 4 * units}),
          recurrent(prefix + "/recurrent_kernel", {units, 4 * units}),
          bias(prefix + "/bias", {4 * units}),
          units(units),
          features(features) {}

    void run_step(const double* x, const std::vector<double>& h_prev,
                  const std::vector<double>& c_prev, Step& st) const {
      const std::size_t G = 4 * units;
      std::vector<double> z(bias.value.ptr(), bias.value.ptr() + G);
      for (std::size_t f = 0; f < features; ++f) {
        const double v = x[f];
        const double* row = kernel.value.ptr() + f * G;
        for (std::size_t j = 0; j < G; ++j) z[j] += v * row[j];
      }
      for (std::size_t u = 0; u < units; ++u) {
        const double v = h_prev[u];
        const double* row = recurrent.value.ptr() + u * G;
        for (std::size_t j = 0; j < G; ++j) z[j] += v * row[j];
      }
      for (std::size_t u = 0; u < units; ++u) {
        st.i[u] = sigmoid(z[u]);
        st.f[u] = sigmoid(z[units + u]);
        st.g[u] = std::tanh(z[2 * units + u]);
        st.o[u] = sigmoid(z[3 * units + u]);
        st.c[u] = st.f[u] * c_prev[u] + st.i[u] * st.g[u];
        st.tanh_c[u] = std::tanh(st.c[u]);
        st.h[u] = st.o[u] * st.tanh_c[u];
      }
      st.h_prev = h_prev;
      st.c_prev = c_prev;
    }

    // dh/dc hold the gradient w.r.t. this step's h and c on entry, and the
    // gradient w.r.t. the previous step's h and c on exit.
    void back_step(const double* x, const Step& st, std::vector<double>& dh,
                   std::vector<double>& dc, double* dx) {
      const std::size_t G = 4 * units;
      std::vector<double> dz(G);
      for (std::size_t u = 0; u < units; ++u) {
        const double d_o = dh[u] * st.tanh_c[u];
        const double dcu = dc[u] + dh[u] * st.o[u] * (1.0 - st.tanh_c[u] * st.tanh_c[u]);
        const double d_i = dcu * st.g[u];
        const double d_g = dcu * st.i[u];
        const double d_f = dcu * st.c_prev[u];
        dc[u] = dcu * st.f[u];
        dz[u] = d_i * st.i[u] * (1.0 - st.i[u]);
        dz[units + u] = d_f * st.f[u] * (1.0 - st.f[u]);
        dz[2 * units + u] = d_g * (1.0 - st.g[u] * st.g[u]);
        dz[3 * units + u] = d_o * st.o[u] * (1.0 - st.o[u]);
      }
      for (std::size_t j = 0; j < G; ++j) bias.grad[j] += dz[j];
      for (std::size_t f = 0; f < features; ++f) {
        const double v = x[f];
        const double* row = kernel.value.ptr() + f * G;
        double* grow = kernel.grad.ptr() + f * G;
        double s = 0.0;
        for (std::size_t j = 0; j < G; ++j) {
          s += row[j] * dz[j];
          grow[j] += v * dz[j];
        }
        dx[f] += s;
      }
      for (std::size_t u = 0; u < units; ++u) {
        const double v = st.h_prev[u];
        const double* row = recurrent.value.ptr() + u * G;
        double* grow = recurrent.grad.ptr() + u * G;
        double s = 0.0;
        for (std::size_t j = 0; j < G; ++j) {
          s += row[j] * dz[j];
          grow[j] += v * dz[j];
        }
        dh[u] = s;
      }
    }

    Param kernel;
    Param recurrent;
    Param bias;
    std::size_t units;
    std::size_t features;
    std::vector<Step> steps;
  };

  std::size_t units_;
  std::size_t features_;
  std::array<Direction, 2> dirs_;
  Tensor input_;
};

}  // namespace utivad::nn
