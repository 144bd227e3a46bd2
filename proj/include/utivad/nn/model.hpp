#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "utivad/nn/layers.hpp"
#include "utivad/nn/loss.hpp"

namespace utivad::nn {

/// A linear stack of layers with a fixed input shape. Shapes are resolved at
/// `add` time, so a model that builds has a consistent shape chain.
class Sequential {
 public:
  explicit Sequential(Shape input_shape)
      : input_shape_(input_shape), shapes_{std::move(input_shape)} {}

  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    if (!names_.insert(layer->name()).second) {
      fail_validation("duplicate layer name ", layer->name());
    }
    shapes_.push_back(layer->output_shape(shapes_.back()));
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  // shapes()[i] is the input shape of layer i; shapes().back() the output.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) {
    if (x.shape() != input_shape_) {
      fail_dimension("model input shape ", shape_str(x.shape()),
                     " differs from expected ", shape_str(input_shape_));
    }
    require_finite(x, "model input");
    Tensor h = x;
    for (auto& layer : layers_) {
      h = layer->forward(h, mode, rng);
      require_finite(h, layer->name());
    }
    return h;
  }

  Tensor forward(const Tensor& x) {
    Rng rng(0);
    return forward(x, Mode::infer, rng);
  }

  /// Accumulates parameter gradients. With input_grad false the returned
  /// input gradient may be all zeros, which saves the first layer's work.
  Tensor backward(const Tensor& grad_out, bool input_grad = true) {
    if (!layers_.empty()) layers_.front()->set_input_grad(input_grad);
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    return g;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& layer : layers_) {
      for (Param* p : layer->params()) out.push_back(p);
    }
    return out;
  }

  void zero_grad() {
    for (Param* p : params()) p->grad.fill(0.0);
  }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) layer->init(rng);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (Param* p : params()) n += p->value.size();
    return n;
  }

  double kink_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& layer : layers_) m = std::min(m, layer->kink_margin());
    return m;
  }

  std::vector<Tensor> snapshot() {
    std::vector<Tensor> out;
    for (Param* p : params()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Tensor>& values) {
    auto ps = params();
    if (values.size() != ps.size()) {
      fail_validation("snapshot has ", values.size(), " tensors, model has ",
                      ps.size());
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (values[i].shape() != ps[i]->value.shape()) {
        fail_dimension("snapshot tensor ", ps[i]->name, " has shape ",
                       shape_str(values[i].shape()), ", expected ",
                       shape_str(ps[i]->value.shape()));
      }
      ps[i]->value = values[i];
    }
  }

 private:
  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::set<std::string> names_;
};

struct GradCheckOptions {
  double eps = 1e-5;
  Mode mode = Mode::infer;
  std::uint64_t dropout_seed = 0;  // reused for every evaluation in train mode
  // 0 checks every entry; otherwise a seeded subset of at most this many
  // entries per parameter tensor.
  std::size_t max_entries_per_param = 0;
  std::uint64_t subset_seed = 1;
  // Lower bound on |a|+|n| in the relative-error denominator. Central
  // differences at eps 1e-5 cannot resolve gradients much below 1e-7.
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  double kink_margin = std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
};

/// Compares backprop gradients with central differences of the loss,
/// returning max |a-n| / max(floor, |a|+|n|) over the checked entries.
/// `kink_margin` reports how close the evaluation point sits to a relu or
/// maxpool kink; callers should resample inputs when it is below 1e-4.
inline GradCheckResult grad_check(Sequential& model, const Tensor& input,
                                  const Tensor& target, LossKind loss,
                                  const GradCheckOptions& opt = {}) {
  auto eval = [&]() {
    Rng rng(opt.dropout_seed);
    return loss_value(loss, model.forward(input, opt.mode, rng), target);
  };
  model.zero_grad();
  Rng rng(opt.dropout_seed);
  const Tensor out = model.forward(input, opt.mode, rng);
  GradCheckResult r;
  r.kink_margin = model.kink_margin();
  model.backward(loss_grad(loss, out, target));

  Rng pick(opt.subset_seed);
  for (Param* p : model.params()) {
    std::vector<std::size_t> idx(p->value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_entries_per_param && idx.size() > opt.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(opt.max_entries_per_param);
    }
    for (std::size_t i : idx) {
      const double orig = p->value[i];
      p->value[i] = orig + opt.eps;
      const double up = eval();
      p->value[i] = orig - opt.eps;
      const double down = eval();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max(opt.denominator_floor, std::abs(analytic) + std::abs(numeric));
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_param = p->name;
      }
    }
  }
  return r;
}

}  // namespace utivad::nn
