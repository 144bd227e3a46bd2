#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "utivad/align/prep.hpp"
#include "utivad/nn/model.hpp"
#include "utivad/nn/optim.hpp"

namespace utivad::models {

/// Random-access samples. Inputs are produced on demand so large window sets
/// need not be materialized.
struct Dataset {
  std::size_t size = 0;
  std::function<Tensor(std::size_t)> input;
  std::function<Tensor(std::size_t)> target;

  bool empty() const noexcept { return size == 0; }
};

/// A dataset over a fixed list of tensors.
inline Dataset tensor_dataset(std::vector<Tensor> inputs, std::vector<Tensor> targets) {
  if (inputs.size() != targets.size()) {
    fail_validation("dataset has ", inputs.size(), " inputs but ", targets.size(), " targets");
  }
  auto in = std::make_shared<std::vector<Tensor>>(std::move(inputs));
  auto out = std::make_shared<std::vector<Tensor>>(std::move(targets));
  return Dataset{in->size(), [in](std::size_t i) { return (*in)[i]; },
                 [out](std::size_t i) { return (*out)[i]; }};
}

struct TrainConfig {
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double learning_rate = 0.0002;
  std::size_t batch_size = 16;
  int max_epochs = 30;
  int patience = 3;
  std::uint64_t seed = 1;
  align::SilenceMode silence_mode = align::SilenceMode::remove_silence;

  static TrainConfig vad_defaults() {
    TrainConfig c;
    c.optimizer = nn::OptimizerKind::sgd;
    c.learning_rate = 0.001;
    c.batch_size = 64;
    return c;
  }
  static TrainConfig ssi_defaults() { return TrainConfig{}; }

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      fail_validation("learning rate must be positive, got ", learning_rate);
    }
    if (batch_size == 0) fail_validation("batch size must be at least 1");
    if (max_epochs < 1) fail_validation("max epochs must be at least 1");
    if (patience < 1) fail_validation("patience must be at least 1, got ", patience);
  }

  nn::OptimizerState optimizer_state() const {
    return optimizer == nn::OptimizerKind::sgd ? nn::OptimizerState::sgd(learning_rate)
                                               : nn::OptimizerState::adam(learning_rate);
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainHistory {
  double initial_dev_loss = 0.0;  // before any update
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 means the initial weights were never beaten
  double best_dev_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

/// Mean per-sample loss in inference mode.
inline double evaluate_loss(nn::Sequential& model, const Dataset& data, nn::LossKind loss) {
  if (data.empty()) fail_validation("cannot evaluate on an empty dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size; ++i) {
    sum += nn::loss_value(loss, model.forward(data.input(i)), data.target(i));
  }
  return sum / static_cast<double>(data.size);
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with early stopping on dev loss. Gradients are the
/// batch mean of per-sample gradients. At the end the weights with the lowest
/// dev loss seen (including the initial ones) are restored.
inline TrainHistory train(nn::Sequential& model, const Dataset& train_set, const Dataset& dev_set,
                          nn::LossKind loss, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) fail_validation("training set is empty");
  if (dev_set.empty()) fail_validation("a non-empty dev set is required for early stopping");

  std::mt19937_64 shuffle_rng(cfg.seed);
  nn::Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  nn::OptimizerState opt = cfg.optimizer_state();
  auto params = model.params();

  TrainHistory h;
  h.initial_dev_loss = evaluate_loss(model, dev_set, loss);
  h.best_dev_loss = h.initial_dev_loss;
  auto best = model.snapshot();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const double n = static_cast<double>(end - b);
      model.zero_grad();
      try {
        for (std::size_t k = b; k < end; ++k) {
          const Tensor target = train_set.target(order[k]);
          const Tensor pred = model.forward(train_set.input(order[k]), nn::Mode::train, dropout_rng);
          const double l = nn::loss_value(loss, pred, target);
          if (!std::isfinite(l)) fail_runtime("non-finite loss");
          loss_sum += l;
          model.backward(nn::loss_grad(loss, pred, target, n), false);
        }
        nn::optimizer_step(params, opt);
      } catch (const RuntimeFailure& e) {
        fail_runtime("training diverged at epoch ", epoch, ", batch ", batch_index, ": ",
                     e.what());
      }
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), 0.0};
    try {
      rec.dev_loss = evaluate_loss(model, dev_set, loss);
    } catch (const RuntimeFailure& e) {
      fail_runtime("training diverged at epoch ", epoch, " (dev evaluation): ", e.what());
    }
    h.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_loss < h.best_dev_loss) {
      h.best_dev_loss = rec.dev_loss;
      h.best_epoch = epoch;
      best = model.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      h.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  model.restore(best);
  return h;
}

}  // namespace utivad::models
