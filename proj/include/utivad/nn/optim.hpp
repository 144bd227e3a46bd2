#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "utivad/nn/layers.hpp"

namespace utivad::nn {

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // Adam first moments, one per parameter
  std::vector<Tensor> v;  // Adam second moments

  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState adam(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.learning_rate = lr;
    return s;
  }
};

/// Applies one update using the gradients stored alongside each parameter.
/// Throws RuntimeFailure naming the parameter if any gradient is not finite;
/// in that case no parameter is modified.
inline void optimizer_step(std::span<Param* const> params, OptimizerState& state) {
  if (!(state.learning_rate > 0.0)) {
    fail_validation("learning rate must be positive, got ", state.learning_rate);
  }
  for (const Param* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      fail_dimension("gradient shape ", shape_str(p->grad.shape()),
                     " differs from parameter ", p->name, " shape ",
                     shape_str(p->value.shape()));
    }
    if (!p->grad.all_finite()) {
      fail_runtime("non-finite gradient in parameter ", p->name);
    }
  }
  ++state.step;
  const double lr = state.learning_rate;
  if (state.kind == OptimizerKind::sgd) {
    for (Param* p : params) {
      auto w = p->value.data();
      auto g = p->grad.data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
    return;
  }
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) {
    fail_validation("optimizer state tracks ", state.m.size(),
                    " parameters but got ", params.size());
  }
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.data();
    auto g = params[k]->grad.data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    if (m.size() != w.size()) {
      fail_dimension("Adam moment shape mismatch for ", params[k]->name);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace utivad::nn
