#pragma once

#include <algorithm>
#include <cmath>

#include "utivad/core/tensor.hpp"

namespace utivad::nn {

inline constexpr double kBceClamp = 1e-7;

enum class LossKind { mse, bce };

namespace detail {
inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail_dimension(what, ": prediction shape ", shape_str(a.shape()),
                   " differs from target shape ", shape_str(b.shape()));
  }
}
}  // namespace detail

/// Mean over elements of -[t ln p + (1-t) ln(1-p)], p clamped to [eps, 1-eps].
inline double bce_loss(const Tensor& prob, const Tensor& target) {
  detail::check_same_shape(prob, target, "bce_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double t = target[i];
    if (t != 0.0 && t != 1.0) {
      fail_validation("bce_loss target must be 0 or 1, got ", t, " at index ", i);
    }
    const double p = std::clamp(prob[i], kBceClamp, 1.0 - kBceClamp);
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(prob.size());
}

/// d bce_loss / d prob, with the mean taken over `batch` samples.
inline Tensor bce_grad(const Tensor& prob, const Tensor& target, double batch = 1.0) {
  detail::check_same_shape(prob, target, "bce_grad");
  Tensor g(prob.shape());
  const double n = static_cast<double>(prob.size()) * batch;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = prob[i];
    if (p < kBceClamp || p > 1.0 - kBceClamp) continue;  // clamped: flat
    g[i] = (p - target[i]) / (p * (1.0 - p)) / n;
  }
  return g;
}

inline double mse_loss(const Tensor& pred, const Tensor& target) {
  detail::check_same_shape(pred, target, "mse_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

inline Tensor mse_grad(const Tensor& pred, const Tensor& target, double batch = 1.0) {
  detail::check_same_shape(pred, target, "mse_grad");
  Tensor g(pred.shape());
  const double scale = 2.0 / (static_cast<double>(pred.size()) * batch);
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

inline double loss_value(LossKind kind, const Tensor& pred, const Tensor& target) {
  return kind == LossKind::mse ? mse_loss(pred, target) : bce_loss(pred, target);
}

inline Tensor loss_grad(LossKind kind, const Tensor& pred, const Tensor& target,
                        double batch = 1.0) {
  return kind == LossKind::mse ? mse_grad(pred, target, batch)
                               : bce_grad(pred, target, batch);
}

}  // namespace utivad::nn
