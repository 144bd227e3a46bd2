#pragma once

// End-to-end experiments shared by the command-line tool and the acceptance
// suite. Each runner trains, evaluates and optionally writes its models and a
// report into an output directory. Reports hold no timestamps, so two runs
// with the same configuration produce identical files.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "utivad/dsp/griffin_lim.hpp"
#include "utivad/eval/report.hpp"
#include "utivad/models/io.hpp"
#include "utivad/models/ssi.hpp"
#include "utivad/models/vad_model.hpp"

namespace utivad::pipeline {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

/// Image size the prepared corpus must have for a preset.
inline models::PrepConfig prep_for(models::Preset preset) {
  models::PrepConfig cfg;
  if (preset == models::Preset::paper_exact) {
    cfg.image_height = 64;
    cfg.image_width = 128;
  } else if (preset == models::Preset::tiny) {
    cfg.image_height = 32;
    cfg.image_width = 32;
  }
  return cfg;
}

inline Json train_config_json(const models::TrainConfig& t) {
  return {{"optimizer", t.optimizer == nn::OptimizerKind::sgd ? "sgd" : "adam"},
          {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience}};
}

inline Json history_json(const models::TrainHistory& h) {
  Json epochs = Json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_loss", e.dev_loss}});
  }
  return {{"initial_dev_loss", h.initial_dev_loss},
          {"best_epoch", h.best_epoch},
          {"best_dev_loss", h.best_dev_loss},
          {"stopped_early", h.stopped_early},
          {"epochs", epochs}};
}

inline void write_json(const fs::path& path, const Json& j) {
  io::write_file_atomic(path, j.dump(2) + "\n");
}

inline void write_report(const fs::path& dir, const eval::Report& r, const std::string& text) {
  write_json(dir / "report.json", r.to_json());
  io::write_file_atomic(dir / "report.txt", text);
}

// ---- image VAD ----

struct VadExperimentConfig {
  models::ModelSpec spec = models::preset_spec(models::ModelKind::vad_cnn2d,
                                               models::Preset::reduced);
  models::TrainConfig train = models::TrainConfig::vad_defaults();
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t train_stride = 1;  // keep every n-th training frame
  double threshold = 0.5;

  void validate() const {
    if (spec.kind != models::ModelKind::vad_cnn2d) fail_validation("expected a VAD model spec");
    if (seeds.empty()) fail_validation("at least one seed is required");
    if (train_stride == 0) fail_validation("train stride must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail_validation("threshold must lie in [0, 1]");
    train.validate();
  }

  Json to_json() const {
    return {{"model", models::spec_to_json(spec)},
            {"train", train_config_json(train)},
            {"seeds", seeds},
            {"train_stride", train_stride},
            {"threshold", threshold}};
  }
};

struct VadSeedResult {
  std::uint64_t seed = 0;
  models::TrainHistory history;
  models::VadEvaluation dev, test;
};

struct VadExperiment {
  std::vector<VadSeedResult> runs;
  eval::Report report;
  std::string text;

  eval::MeanStd test_accuracy() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.test.metrics.accuracy.value_or(0.0));
    return eval::mean_std(v);
  }
  eval::MeanStd test_auc() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.test.auc.value_or(0.0));
    return eval::mean_std(v);
  }
};

using SeedEpochCallback = std::function<void(std::uint64_t seed, const models::EpochRecord&)>;

inline Json vad_eval_json(const models::VadEvaluation& e) {
  Json j = eval::metrics_json(e.metrics, e.auc);
  j["confusion"] = eval::confusion_json(e.confusion);
  j["frames"] = e.frames;
  return j;
}

inline std::string vad_model_file(std::uint64_t seed) {
  return "vad_seed" + std::to_string(seed) + ".wts";
}

/// Trains the frame classifier once per seed and evaluates it on the dev and
/// test splits against the audio-VAD labels. With a non-empty `out_dir` the
/// models and the report are written there.
inline VadExperiment run_vad_experiment(const models::Corpus& c, const VadExperimentConfig& cfg,
                                        const fs::path& out_dir = {},
                                        const SeedEpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_set = models::frame_dataset(c, models::frame_refs(c, "train", cfg.train_stride));
  const auto dev_set = models::frame_dataset(c, models::frame_refs(c, "dev"));

  VadExperiment out;
  eval::ConfusionMatrix pooled_dev, pooled_test;
  Json per_seed = Json::array();
  for (std::uint64_t seed : cfg.seeds) {
    nn::Sequential model = models::build_model(cfg.spec);
    model.init(seed);
    models::TrainConfig tc = cfg.train;
    tc.seed = seed;
    VadSeedResult r;
    r.seed = seed;
    models::EpochCallback cb;
    if (on_epoch) cb = [&](const models::EpochRecord& e) { on_epoch(seed, e); };
    r.history = models::train(model, train_set, dev_set, nn::LossKind::bce, tc, cb);
    r.dev = models::evaluate_vad(model, c, "dev", cfg.threshold);
    r.test = models::evaluate_vad(model, c, "test", cfg.threshold);
    if (!out_dir.empty()) {
      models::save_model(out_dir / vad_model_file(seed), cfg.spec, model, cfg.threshold);
    }
    for (auto [pool, cm] : {std::pair{&pooled_dev, r.dev.confusion},
                            std::pair{&pooled_test, r.test.confusion}}) {
      pool->tn += cm.tn;
      pool->fp += cm.fp;
      pool->fn += cm.fn;
      pool->tp += cm.tp;
    }
    per_seed.push_back({{"seed", seed},
                        {"training", history_json(r.history)},
                        {"dev", vad_eval_json(r.dev)},
                        {"test", vad_eval_json(r.test)}});
    out.runs.push_back(std::move(r));
  }

  out.report.run_id = "vad-" + std::to_string(cfg.seeds.size()) + "seeds";
  out.report.config = cfg.to_json();
  out.report.config["corpus_utterances"] = c.size();
  out.report.config["train_frames"] = train_set.size;
  out.report.metrics["per_seed"] = per_seed;
  out.report.metrics["test_accuracy"] = eval::mean_std_json(out.test_accuracy());
  out.report.metrics["test_roc_auc"] = eval::mean_std_json(out.test_auc());
  out.report.metrics["pooled_confusion"] = {{"dev", eval::confusion_json(pooled_dev)},
                                            {"test", eval::confusion_json(pooled_test)}};
  out.report.paper_refs = {{"dev", eval::reference_json(eval::reference::kDevClassification)},
                           {"test", eval::reference_json(eval::reference::kTestClassification)}};

  const auto& first = out.runs.front();
  const std::vector<eval::ClassificationColumn> cols{
      {"dev", first.dev.metrics, first.dev.auc, eval::reference::kDevClassification},
      {"test", first.test.metrics, first.test.auc, eval::reference::kTestClassification}};
  const std::vector<std::pair<std::string, eval::ConfusionMatrix>> cms{
      {"dev (pooled over seeds)", pooled_dev}, {"test (pooled over seeds)", pooled_test}};
  out.text = "Frame classification, seed " + std::to_string(first.seed) + "\n" +
             eval::classification_table(cols).str() + "\n" + eval::confusion_table(cms).str() +
             "\nTest accuracy over seeds: " + eval::fmt(out.test_accuracy()) +
             "\nTest ROC-AUC over seeds:  " + eval::fmt(out.test_auc()) + "\n";
  if (!out_dir.empty()) write_report(out_dir, out.report, out.text);
  return out;
}

// ---- silence ablation ----

struct AblationSetup {
  std::vector<models::ModelKind> nets{models::ModelKind::ssi_conv3d,
                                      models::ModelKind::ssi_conv3d_bilstm};
  models::Preset preset = models::Preset::reduced;
  models::AblationConfig base;  // spec is replaced per net
  models::VadSource source = models::VadSource::audio_vad;

  void validate() const {
    if (nets.empty()) fail_validation("no network selected");
    for (auto k : nets) {
      if (k == models::ModelKind::vad_cnn2d) fail_validation("the ablation trains SSI networks");
    }
    auto b = base;
    b.spec = models::preset_spec(nets.front(), preset);
    b.validate();
  }
};

struct AblationOutcome {
  std::vector<models::AblationResult> results;  // one per net
  std::optional<double> dev_disagreement;       // image vs audio keep/drop, image source only
  eval::Report report;
  std::string text;
};

inline Json mode_json(const models::ModeResult& m) {
  return {{"mse_train", m.mse_train}, {"mse_dev", m.mse_dev},   {"mse_test", m.mse_test},
          {"mcd_db", m.mcd},          {"n_train", m.n_train},   {"n_dev", m.n_dev},
          {"n_test", m.n_test},       {"training", history_json(m.history)}};
}

inline Json cell_json(const eval::AblationCell& c) {
  return {{"mse_dev", eval::mean_std_json(c.mse_dev)},
          {"mse_test", eval::mean_std_json(c.mse_test)},
          {"mcd_db", eval::mean_std_json(c.mcd)}};
}

/// Keep/drop disagreement between two label sources over one split.
inline double split_disagreement(const models::Corpus& c, const std::vector<std::vector<int>>& a,
                                 const std::vector<std::vector<int>>& b, const std::string& split,
                                 align::SilenceMode mode = align::SilenceMode::keep_padded) {
  std::vector<std::vector<int>> sa, sb;
  for (std::size_t u : models::split_indices(c, split)) {
    sa.push_back(a[u]);
    sb.push_back(b[u]);
  }
  return models::keep_decision_disagreement(sa, sb, mode, c.front().images.fps());
}

inline std::string ablation_model_file(models::ModelKind k, align::SilenceMode m,
                                       std::uint64_t seed) {
  return std::string(models::kind_name(k)) +
         (m == align::SilenceMode::keep_padded ? "_keep180" : "_removed") + "_seed" +
         std::to_string(seed) + ".wts";
}

/// Trains every selected net with silence removed and with 180 ms kept. With
/// the image source the frame labels come from `vad_model`.
inline AblationOutcome run_ablation(const models::Corpus& c, const AblationSetup& setup,
                                    nn::Sequential* vad_model = nullptr,
                                    const fs::path& out_dir = {},
                                    const models::AblationProgress& progress = {}) {
  setup.validate();
  AblationOutcome out;
  const auto audio = models::audio_labels(c);
  std::vector<std::vector<int>> labels = audio;
  if (setup.source == models::VadSource::image_vad) {
    if (!vad_model) fail_validation("the image VAD source needs a trained VAD model");
    labels = models::image_vad_labels(*vad_model, c);
    out.dev_disagreement = split_disagreement(c, audio, labels, "dev");
  }
  const auto stats = models::training_mel_stats(c);

  Json nets = Json::array();
  std::vector<eval::AblationMeasuredRow> rows;
  for (auto kind : setup.nets) {
    models::AblationConfig cfg = setup.base;
    cfg.spec = models::preset_spec(kind, setup.preset);
    models::AblationModelSink sink;
    if (!out_dir.empty()) {
      sink = [&](std::uint64_t seed, align::SilenceMode mode, nn::Sequential& m) {
        models::save_model(out_dir / ablation_model_file(kind, mode, seed), cfg.spec, m, 0.5,
                           stats);
      };
    }
    auto res = models::run_silence_ablation(c, labels, cfg, progress, sink);
    Json runs = Json::array();
    for (const auto& r : res.runs) {
      runs.push_back({{"seed", r.seed}, {"removed", mode_json(r.removed)},
                      {"keep180", mode_json(r.kept)}});
    }
    nets.push_back({{"net", models::kind_name(kind)},
                    {"runs", runs},
                    {"removed", cell_json(res.summary(false))},
                    {"keep180", cell_json(res.summary(true))},
                    {"keep180_wins_dev", res.kept_wins_dev()}});
    rows.push_back({models::kind_name(kind), res.summary(false), res.summary(true)});
    out.results.push_back(std::move(res));
  }

  const bool image = setup.source == models::VadSource::image_vad;
  out.report.run_id = std::string("ablation-") + models::source_name(setup.source) + "-" +
                      models::preset_name(setup.preset);
  out.report.config = {{"nets", Json::array()},
                       {"preset", models::preset_name(setup.preset)},
                       {"vad_source", models::source_name(setup.source)},
                       {"seeds", setup.base.seeds},
                       {"train", train_config_json(setup.base.train)},
                       {"train_stride", setup.base.train_stride},
                       {"eval_stride", setup.base.eval_stride},
                       {"corpus_utterances", c.size()},
                       {"mse_units", "standardized mel (per-band z-score)"}};
  for (auto k : setup.nets) out.report.config["nets"].push_back(models::kind_name(k));
  out.report.metrics["nets"] = nets;
  if (out.dev_disagreement) out.report.metrics["dev_keep_disagreement"] = *out.dev_disagreement;
  Json refs = Json::array();
  for (const auto& r : image ? eval::reference::kImageVadAblation
                             : eval::reference::kAudioVadAblation) {
    refs.push_back({{"net", r.net},
                    {"removed", {{"mse_dev", r.removed[0]}, {"mse_test", r.removed[1]},
                                 {"mcd_db", r.removed[2]}}},
                    {"keep180", {{"mse_dev", r.kept[0]}, {"mse_test", r.kept[1]},
                                 {"mcd_db", r.kept[2]}}}});
  }
  out.report.paper_refs["ablation"] = refs;

  out.text = std::string("Silence ablation, labels from ") + models::source_name(setup.source) +
             " (MSE in standardized units, MCD in dB, mean +- std over seeds)\n" +
             eval::ablation_table(rows, image).str();
  if (out.dev_disagreement) {
    out.text += "Dev keep/drop disagreement with audio VAD: " + eval::fmt(*out.dev_disagreement) +
                "\n";
  }
  if (!out_dir.empty()) write_report(out_dir, out.report, out.text);
  return out;
}

// ---- retained silence vs resynthesis MCD ----

struct SilenceTrendRow {
  std::string condition;
  eval::MeanStd mcd;
  eval::MeanStd duration_s;
};

/// Analysis-resynthesis MCD of end-silence variants: each variant is turned
/// into a mel spectrogram, inverted with Griffin-Lim and compared with its
/// own analysis. Rows: A (trimmed), B (keep 180 ms), C (B re-trimmed), then
/// one row per retained-silence step.
inline std::vector<SilenceTrendRow> silence_trend(const std::vector<dsp::Waveform>& audio,
                                                  const std::vector<double>& keep_steps,
                                                  int gl_iters = 60,
                                                  const vad::VadConfig& vcfg = {}) {
  if (audio.empty()) fail_validation("no utterances for the silence trend");
  std::vector<std::string> names{"A trimmed", "B keep 180 ms", "C B re-trimmed"};
  for (double k : keep_steps) names.push_back("keep " + eval::fmt(k, 0) + " ms");
  std::vector<std::vector<double>> mcds(names.size()), durs(names.size());
  for (const auto& w : audio) {
    const auto v = vad::silence_variants(w, vcfg, keep_steps);
    std::vector<const dsp::Waveform*> ws{&v.trimmed, &v.trimmed_keep180, &v.reapplied};
    for (const auto& p : v.padded) ws.push_back(&p.audio);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (ws[i]->empty()) continue;
      dsp::MelConfig mc;
      mc.sample_rate = ws[i]->sample_rate;
      const auto ref = dsp::melspectrogram(*ws[i], mc);
      auto est = dsp::melspectrogram(dsp::griffin_lim(ref, mc, gl_iters, 0), mc);
      const std::size_t n = std::min(ref.n_frames(), est.n_frames());
      auto cut = [n](dsp::MelTrack m) {
        Matrix f(n, m.n_mels());
        for (std::size_t r = 0; r < n; ++r) {
          std::copy_n(m.frames.row(r).begin(), m.n_mels(), f.row(r).begin());
        }
        m.frames = std::move(f);
        return m;
      };
      mcds[i].push_back(dsp::mcd(dsp::mel_cepstra(cut(ref)), dsp::mel_cepstra(cut(est))));
      durs[i].push_back(ws[i]->duration());
    }
  }
  std::vector<SilenceTrendRow> rows;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (mcds[i].empty()) continue;
    rows.push_back({names[i], eval::mean_std(mcds[i]), eval::mean_std(durs[i])});
  }
  return rows;
}

}  // namespace utivad::pipeline
