#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "utivad/eval/report.hpp"
#include "utivad/models/arch.hpp"
#include "utivad/models/data.hpp"

namespace utivad::models {

/// One standardized 80-band frame per window, at the window centre. The
/// returned track carries `stats` so it can be destandardized.
inline dsp::MelTrack predict_melspec(nn::Sequential& model, const align::UtiSequence& seq,
                                     const std::vector<align::Window>& windows,
                                     const dsp::MelStats& stats) {
  const std::size_t len = model.input_shape().at(0);
  dsp::MelTrack out{Matrix(windows.size(), kMelOutputs), seq.fps(), true, stats};
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Tensor y = model.forward(align::window_tensor(seq, windows[i], len));
    if (y.size() != kMelOutputs) fail_validation("model does not output ", kMelOutputs, " bands");
    std::copy(y.data().begin(), y.data().end(), out.frames.row(i).begin());
  }
  return out;
}

/// Predictions for every sample of a dataset, one row each.
inline Matrix predict_rows(nn::Sequential& model, const Dataset& data) {
  Matrix out(data.size, kMelOutputs);
  for (std::size_t i = 0; i < data.size; ++i) {
    const Tensor y = model.forward(data.input(i));
    std::copy(y.data().begin(), y.data().end(), out.row(i).begin());
  }
  return out;
}

/// MCD between destandardized predictions and the raw reference mel frames
/// at the window centres.
inline double window_mcd(const Corpus& c, const std::vector<WindowRef>& refs,
                         const Matrix& predicted, const dsp::MelStats& stats) {
  if (predicted.rows != refs.size()) fail_validation("one prediction per window required");
  dsp::MelTrack est{predicted, align::kDefaultFps, true, stats};
  dsp::MelTrack ref{Matrix(refs.size(), kMelOutputs), align::kDefaultFps, false, {}};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto row = c[refs[i].utt].mel.frames.row(refs[i].window.center);
    std::copy(row.begin(), row.end(), ref.frames.row(i).begin());
  }
  return dsp::mcd(dsp::mel_cepstra(ref), dsp::mel_cepstra(dsp::destandardize(est)));
}

enum class VadSource { audio_vad, image_vad };

inline std::string source_name(VadSource s) {
  return s == VadSource::audio_vad ? "audio_vad" : "image_vad";
}

struct AblationConfig {
  ModelSpec spec = preset_spec(ModelKind::ssi_conv3d_bilstm, Preset::reduced);
  TrainConfig train = TrainConfig::ssi_defaults();
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t train_stride = 1;  // keep every n-th training window
  std::size_t eval_stride = 1;   // same for dev and test

  void validate() const {
    if (!spec.is_ssi()) fail_validation("the silence ablation trains a spectral regression net");
    if (seeds.empty()) fail_validation("the ablation needs at least one seed");
    if (train_stride == 0 || eval_stride == 0) fail_validation("strides must be positive");
    train.validate();
  }
};

struct ModeResult {
  double mse_train = 0.0, mse_dev = 0.0, mse_test = 0.0;  // standardized units
  double mcd = 0.0;                                        // dB, test windows
  std::size_t n_train = 0, n_dev = 0, n_test = 0;
  TrainHistory history;
};

struct AblationRun {
  std::uint64_t seed = 0;
  ModeResult removed, kept;
};

struct AblationResult {
  ModelKind net = ModelKind::ssi_conv3d_bilstm;
  std::vector<AblationRun> runs;

  eval::AblationCell summary(bool kept) const {
    std::vector<double> dev, test, mcd;
    for (const auto& r : runs) {
      const auto& m = kept ? r.kept : r.removed;
      dev.push_back(m.mse_dev);
      test.push_back(m.mse_test);
      mcd.push_back(m.mcd);
    }
    return {eval::mean_std(dev), eval::mean_std(test), eval::mean_std(mcd)};
  }
  /// Seeds where retaining silence gave the strictly lower dev MSE.
  std::size_t kept_wins_dev() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.kept.mse_dev < r.removed.mse_dev;
    return n;
  }
};

using AblationProgress = std::function<void(std::uint64_t seed, align::SilenceMode,
                                            const EpochRecord&)>;
using AblationModelSink = std::function<void(std::uint64_t seed, align::SilenceMode,
                                             nn::Sequential&)>;

/// Trains one model for a silence mode and measures it.
inline ModeResult train_silence_mode(const Corpus& c, const std::vector<std::vector<int>>& labels,
                                     const dsp::MelStats& stats, const AblationConfig& cfg,
                                     std::uint64_t seed, align::SilenceMode mode,
                                     nn::Sequential* trained = nullptr,
                                     const AblationProgress& progress = {}) {
  const std::size_t len = cfg.spec.window();
  auto tr = window_refs(c, "train", labels, mode, len, cfg.train_stride);
  auto dv = window_refs(c, "dev", labels, mode, len, cfg.eval_stride);
  auto te = window_refs(c, "test", labels, mode, len, cfg.eval_stride);
  if (tr.empty() || dv.empty() || te.empty()) {
    fail_validation("silence filtering left an empty split");
  }
  ModeResult r;
  r.n_train = tr.size();
  r.n_dev = dv.size();
  r.n_test = te.size();
  const Dataset train_set = window_dataset(c, tr, stats, len);
  const Dataset dev_set = window_dataset(c, dv, stats, len);
  const Dataset test_set = window_dataset(c, te, stats, len);

  nn::Sequential model = build_model(cfg.spec);
  model.init(seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.silence_mode = mode;
  EpochCallback cb;
  if (progress) cb = [&](const EpochRecord& e) { progress(seed, mode, e); };
  r.history = train(model, train_set, dev_set, nn::LossKind::mse, tc, cb);

  r.mse_train = evaluate_loss(model, train_set, nn::LossKind::mse);
  r.mse_dev = evaluate_loss(model, dev_set, nn::LossKind::mse);
  const Matrix pred = predict_rows(model, test_set);
  double sq = 0.0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    const Tensor t = test_set.target(i);
    for (std::size_t b = 0; b < kMelOutputs; ++b) {
      sq += (pred(i, b) - t[b]) * (pred(i, b) - t[b]);
    }
  }
  r.mse_test = sq / static_cast<double>(te.size() * kMelOutputs);
  r.mcd = window_mcd(c, te, pred, stats);
  if (trained) *trained = std::move(model);
  return r;
}

/// Trains the network with silence removed and with 180 ms of silence kept
/// around speech, once per seed, using the given frame labels for filtering.
inline AblationResult run_silence_ablation(const Corpus& c,
                                           const std::vector<std::vector<int>>& labels,
                                           const AblationConfig& cfg,
                                           const AblationProgress& progress = {},
                                           const AblationModelSink& on_model = {}) {
  cfg.validate();
  const auto stats = training_mel_stats(c);
  AblationResult out;
  out.net = cfg.spec.kind;
  for (std::uint64_t seed : cfg.seeds) {
    AblationRun run;
    run.seed = seed;
    for (auto mode : {align::SilenceMode::remove_silence, align::SilenceMode::keep_padded}) {
      nn::Sequential model(Shape{1});
      auto r = train_silence_mode(c, labels, stats, cfg, seed, mode, &model, progress);
      if (on_model) on_model(seed, mode, model);
      (mode == align::SilenceMode::keep_padded ? run.kept : run.removed) = std::move(r);
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

}  // namespace utivad::models
