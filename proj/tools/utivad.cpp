// utivad: command-line driver for the ultrasound VAD and silent-speech
// pipeline. Every subcommand writes its artifacts plus run.json into an
// output directory. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "utivad/dsp/melz.hpp"
#include "utivad/pipeline.hpp"

namespace {

using namespace utivad;
using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using models::ModelKind;
using models::Preset;

std::size_t worker_cap() {
  const char* env = std::getenv("UTIVAD_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) fail_validation("UTIVAD_THREADS must be a positive integer, got '", env, "'");
  return static_cast<std::size_t>(n);
}

/// Collects the resolved configuration of one invocation and writes run.json.
class RunLog {
 public:
  explicit RunLog(std::string command) : command_(std::move(command)) {}

  Json config = Json::object();
  std::optional<std::uint64_t> seed;

  void write(const fs::path& dir) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::size_t cap = worker_cap();
    Json j{{"command", command_},
           {"config", config},
           {"seed", seed ? Json(*seed) : Json(nullptr)},
           {"versions", {{"utivad", pipeline::kVersion}, {"cli11", CLI11_VERSION},
                         {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                               std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                               "." +
                                               std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
           {"threads", {{"requested", cap}, {"used", 1}}},
           {"wall_time_s", wall}};
    pipeline::write_json(dir / "run.json", j);
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---- shared option groups ----

struct CorpusOptions {
  std::string manifest;
  std::size_t n_train = 80, n_dev = 10, n_test = 10;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "Corpus manifest (default: generate a synthetic corpus)")
        ->check(CLI::ExistingFile);
    app->add_option("--synth-train", n_train, "Synthetic training utterances")
        ->capture_default_str();
    app->add_option("--synth-dev", n_dev, "Synthetic dev utterances")->capture_default_str();
    app->add_option("--synth-test", n_test, "Synthetic test utterances")->capture_default_str();
    app->add_option("--corpus-seed", seed, "Synthetic corpus seed")->capture_default_str();
  }

  models::Corpus load(const models::PrepConfig& prep) const {
    if (!manifest.empty()) return models::load_corpus(synth::read_manifest(manifest), prep);
    return models::synth_corpus({n_train, n_dev, n_test, seed}, prep);
  }

  Json to_json() const {
    if (!manifest.empty()) return {{"manifest", manifest}};
    return {{"synthetic", {{"train", n_train}, {"dev", n_dev}, {"test", n_test}, {"seed", seed}}}};
  }
};

struct TrainOptions {
  std::optional<int> epochs, patience;
  std::optional<double> lr;
  std::optional<std::size_t> batch;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Maximum epochs (default 30)");
    app->add_option("--patience", patience, "Early-stopping patience (default 3)");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--batch", batch, "Mini-batch size");
  }

  void apply(models::TrainConfig& t) const {
    if (epochs) t.max_epochs = *epochs;
    if (patience) t.patience = *patience;
    if (lr) t.learning_rate = *lr;
    if (batch) t.batch_size = *batch;
  }
};

const std::map<std::string, Preset> kPresets{
    {"paper_exact", Preset::paper_exact}, {"reduced", Preset::reduced}, {"tiny", Preset::tiny}};
const std::map<std::string, ModelKind> kSsiNets{{"conv3d", ModelKind::ssi_conv3d},
                                                 {"bilstm", ModelKind::ssi_conv3d_bilstm}};
const std::map<std::string, align::SilenceMode> kModes{
    {"removed", align::SilenceMode::remove_silence}, {"keep180", align::SilenceMode::keep_padded}};
const std::map<std::string, models::VadSource> kSources{{"audio", models::VadSource::audio_vad},
                                                         {"image", models::VadSource::image_vad}};

std::string mode_name(align::SilenceMode m) {
  return m == align::SilenceMode::keep_padded ? "keep180" : "removed";
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t count) {
  if (count == 0) fail_validation("--seeds must be at least 1");
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

void print_epoch(const std::string& tag, const models::EpochRecord& e) {
  std::cerr << tag << " epoch " << e.epoch << "  train " << eval::fmt(e.train_loss, 5)
            << "  dev " << eval::fmt(e.dev_loss, 5) << "\n";
}

/// Frame labels for a corpus from the requested source.
std::vector<std::vector<int>> corpus_labels(const models::Corpus& c, models::VadSource source,
                                            const std::string& vad_model) {
  if (source == models::VadSource::audio_vad) return models::audio_labels(c);
  if (vad_model.empty()) fail_validation("--vad-source image requires --vad-model");
  auto m = models::load_model(vad_model);
  return models::image_vad_labels(m.model, c, m.threshold);
}

fs::path default_dir(const std::string& manifest, const char* leaf) {
  return fs::path(manifest).parent_path() / leaf;
}

// ---- subcommands ----

struct SynthCmd {
  std::size_t n = 100;
  std::optional<std::size_t> n_train, n_dev, n_test;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("synth", "Generate a synthetic parallel corpus");
    c->add_option("--n", n, "Total utterances, split 80/10/10")->capture_default_str();
    c->add_option("--train", n_train, "Training utterances (overrides --n)");
    c->add_option("--dev", n_dev, "Dev utterances (overrides --n)");
    c->add_option("--test", n_test, "Test utterances (overrides --n)");
    c->add_option("--seed", seed, "Corpus seed")->capture_default_str();
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    synth::CorpusSpec spec;
    if (n < 3) fail_validation("--n must be at least 3 (one utterance per split)");
    const std::size_t held = std::max<std::size_t>(1, (n + 5) / 10);
    spec.n_dev = n_dev.value_or(held);
    spec.n_test = n_test.value_or(held);
    spec.n_train = n_train.value_or(n - 2 * held);
    spec.seed = seed;
    RunLog log("synth");
    log.seed = seed;
    log.config = {{"train", spec.n_train}, {"dev", spec.n_dev}, {"test", spec.n_test}};
    const auto m = synth::gen_corpus(spec, out);
    log.write(out);
    std::cout << "wrote " << m.size() << " utterances and " << (fs::path(out) / "manifest.json")
              << "\n";
  }
};

struct VadAudioCmd {
  std::string manifest, out;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("vad-audio", "Energy/ZCR voice activity detection on the audio");
    c->add_option("--manifest", manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory (default: <corpus>/vad_audio)");
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    const fs::path dir = out.empty() ? default_dir(manifest, "vad_audio") : fs::path(out);
    RunLog log("vad-audio");
    log.config = {{"manifest", manifest}};
    Json summary = Json::array();
    std::size_t agree = 0, counted = 0;
    for (const auto& e : synth::read_manifest(manifest)) {
      const auto audio = dsp::read_wav(e.wav);
      const auto track = vad::vad_decide(audio);
      vad::write_labels_csv(dir / (e.id + ".csv"), track.decisions);
      Json row{{"id", e.id}, {"frames", track.n_frames()}, {"speech_frames", track.speech_frames()}};
      if (fs::exists(e.truth)) {
        const auto truth = synth::truth_from_json(nlohmann::json::parse(io::read_file(e.truth)));
        const auto a = synth::agreement_with_truth(track.decisions, 1000.0 / track.frame_ms, truth);
        row["truth_agreement"] = a.rate();
        agree += a.agree;
        counted += a.counted;
      }
      summary.push_back(row);
    }
    Json j{{"utterances", summary}};
    if (counted) j["truth_agreement"] = static_cast<double>(agree) / static_cast<double>(counted);
    pipeline::write_json(dir / "summary.json", j);
    log.write(dir);
    std::cout << "labelled " << summary.size() << " utterances into " << dir;
    if (counted) std::cout << " (truth agreement " << eval::fmt(j["truth_agreement"].get<double>()) << ")";
    std::cout << "\n";
  }
};

struct LabelsCmd {
  std::string manifest, out, source = "audio", vad_model;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("labels", "Per-ultrasound-frame speech/silence labels");
    c->add_option("--manifest", manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--source", source, "Label source")
        ->check(CLI::IsMember({"audio", "image"}))
        ->capture_default_str();
    c->add_option("--vad-model", vad_model, "Trained frame classifier (.wts) for --source image")
        ->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory (default: <corpus>/labels_<source>)");
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    const fs::path dir = out.empty() ? default_dir(manifest, ("labels_" + source).c_str()) : fs::path(out);
    RunLog log("labels");
    log.config = {{"manifest", manifest}, {"source", source}, {"vad_model", vad_model}};
    models::PrepConfig prep;
    std::optional<models::SavedModel> m;
    if (source == "image") {
      if (vad_model.empty()) fail_validation("--source image requires --vad-model");
      m = models::load_model(vad_model);
      prep.image_height = m->spec.image_height();
      prep.image_width = m->spec.image_width();
    }
    const auto corpus = models::load_corpus(synth::read_manifest(manifest), prep);
    std::size_t speech = 0, total = 0;
    for (const auto& u : corpus) {
      const auto labels =
          m ? models::classify_frames(m->model, u.images, m->threshold).labels : u.audio_labels;
      vad::write_labels_csv(dir / (u.id + ".csv"), labels);
      speech += static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
      total += labels.size();
    }
    log.write(dir);
    std::cout << "wrote " << corpus.size() << " label files to " << dir << " (" << speech << "/"
              << total << " frames speech)\n";
  }
};

struct PrepCmd {
  std::string manifest, out, preset = "reduced";

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("prep", "Resize images, align mel targets and labels");
    c->add_option("--manifest", manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--preset", preset, "Image size preset")
        ->check(CLI::IsMember({"paper_exact", "reduced", "tiny"}))
        ->capture_default_str();
    c->add_option("--out", out, "Output directory (default: <corpus>/prep_<preset>)");
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    const fs::path dir = out.empty() ? default_dir(manifest, ("prep_" + preset).c_str()) : fs::path(out);
    RunLog log("prep");
    const auto prep = pipeline::prep_for(kPresets.at(preset));
    log.config = {{"manifest", manifest}, {"preset", preset},
                  {"image", {prep.image_height, prep.image_width}}};
    const auto corpus = models::load_corpus(synth::read_manifest(manifest), prep);
    for (const auto& u : corpus) {
      align::write_utiz(dir / "images" / (u.id + ".utiz"), u.images);
      dsp::write_melz(dir / "mel" / (u.id + ".melz"), u.mel);
      vad::write_labels_csv(dir / "labels" / (u.id + ".csv"), u.audio_labels);
    }
    const auto stats = models::training_mel_stats(corpus);
    pipeline::write_json(dir / "mel_stats.json", Json{{"mean", stats.mean}, {"std", stats.stddev}});
    log.write(dir);
    std::cout << "prepared " << corpus.size() << " utterances into " << dir << "\n";
  }
};

struct TrainVadCmd {
  CorpusOptions corpus;
  TrainOptions train;
  std::string preset = "reduced", out;
  std::uint64_t seed = 0;
  std::size_t seeds = 1, stride = 1;
  double threshold = 0.5;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("train-vad", "Train the image-based speech/silence classifier");
    corpus.add(c);
    train.add(c);
    c->add_option("--preset", preset, "Model preset")
        ->check(CLI::IsMember({"paper_exact", "reduced", "tiny"}))
        ->capture_default_str();
    c->add_option("--seed", seed, "Training seed")->required();
    c->add_option("--seeds", seeds, "Number of seeds, counting up from --seed")->capture_default_str();
    c->add_option("--train-stride", stride, "Use every n-th training frame")->capture_default_str();
    c->add_option("--threshold", threshold, "Decision threshold")->capture_default_str();
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    pipeline::VadExperimentConfig cfg;
    cfg.spec = models::preset_spec(ModelKind::vad_cnn2d, kPresets.at(preset));
    train.apply(cfg.train);
    cfg.seeds = seed_list(seed, seeds);
    cfg.train_stride = stride;
    cfg.threshold = threshold;
    cfg.validate();
    RunLog log("train-vad");
    log.seed = seed;
    log.config = cfg.to_json();
    log.config["preset"] = preset;
    log.config["corpus"] = corpus.to_json();
    const auto c = corpus.load(pipeline::prep_for(kPresets.at(preset)));
    const auto res = pipeline::run_vad_experiment(
        c, cfg, out, [](std::uint64_t s, const models::EpochRecord& e) {
          print_epoch("seed " + std::to_string(s), e);
        });
    log.write(out);
    std::cout << res.text;
  }
};

struct EvalVadCmd {
  CorpusOptions corpus;
  std::string fixtures, model, split = "test", out;
  std::optional<double> threshold;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("eval-vad", "Evaluate a frame classifier, or the embedded fixtures");
    corpus.add(c);
    c->add_option("--fixtures", fixtures, "Evaluate embedded confusion matrices instead of a model")
        ->check(CLI::IsMember({"table6"}));
    c->add_option("--model", model, "Trained classifier (.wts)")->check(CLI::ExistingFile);
    c->add_option("--split", split, "Split to evaluate")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->capture_default_str();
    c->add_option("--threshold", threshold, "Override the saved decision threshold");
    c->add_option("--out", out, "Directory for report.json/report.txt");
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    RunLog log("eval-vad");
    if (!fixtures.empty()) {
      if (!model.empty()) fail_validation("--fixtures and --model are exclusive");
      const auto text = eval::fixture_tables();
      std::cout << text;
      if (!out.empty()) {
        pipeline::write_report(out, eval::fixture_report(), text);
        log.config = {{"fixtures", fixtures}};
        log.write(out);
      }
      return;
    }
    if (model.empty()) fail_validation("eval-vad needs --model or --fixtures table6");
    auto m = models::load_model(model);
    if (m.spec.kind != ModelKind::vad_cnn2d) fail_validation(model, " is not a frame classifier");
    const double thr = threshold.value_or(m.threshold);
    models::PrepConfig prep;
    prep.image_height = m.spec.image_height();
    prep.image_width = m.spec.image_width();
    const auto c = corpus.load(prep);
    const auto ev = models::evaluate_vad(m.model, c, split, thr);
    eval::Report r;
    r.run_id = "eval-vad-" + split;
    r.config = {{"model", model}, {"split", split}, {"threshold", thr}, {"corpus", corpus.to_json()}};
    r.metrics[split] = pipeline::vad_eval_json(ev);
    const std::vector<eval::ClassificationColumn> cols{{split, ev.metrics, ev.auc, std::nullopt}};
    const std::vector<std::pair<std::string, eval::ConfusionMatrix>> cms{{split, ev.confusion}};
    const auto text = eval::classification_table(cols).str() + "\n" + eval::confusion_table(cms).str();
    std::cout << text;
    if (!out.empty()) {
      pipeline::write_report(out, r, text);
      log.config = r.config;
      log.write(out);
    }
  }
};

struct SsiOptions {
  std::string net = "bilstm", preset = "reduced", mode = "keep180", source = "audio", vad_model;
  std::size_t train_stride = 1, eval_stride = 1;

  void add(CLI::App* c, bool with_net) {
    if (with_net) {
      c->add_option("--net", net, "Network")->check(CLI::IsMember({"conv3d", "bilstm"}))
          ->capture_default_str();
      c->add_option("--preset", preset, "Model preset")
          ->check(CLI::IsMember({"paper_exact", "reduced", "tiny"}))
          ->capture_default_str();
      c->add_option("--train-stride", train_stride, "Use every n-th training window")
          ->capture_default_str();
    }
    c->add_option("--silence-mode", mode, "Silence handling")
        ->check(CLI::IsMember({"removed", "keep180"}))
        ->capture_default_str();
    c->add_option("--vad-source", source, "Labels used for silence filtering")
        ->check(CLI::IsMember({"audio", "image"}))
        ->capture_default_str();
    c->add_option("--vad-model", vad_model, "Frame classifier for --vad-source image")
        ->check(CLI::ExistingFile);
    c->add_option("--eval-stride", eval_stride, "Use every n-th dev/test window")
        ->capture_default_str();
  }
};

struct TrainSsiCmd {
  CorpusOptions corpus;
  TrainOptions train;
  SsiOptions ssi;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("train-ssi", "Train a spectral regression network");
    corpus.add(c);
    train.add(c);
    ssi.add(c, true);
    c->add_option("--seed", seed, "Training seed")->required();
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    models::AblationConfig cfg;
    cfg.spec = models::preset_spec(kSsiNets.at(ssi.net), kPresets.at(ssi.preset));
    train.apply(cfg.train);
    cfg.seeds = {seed};
    cfg.train_stride = ssi.train_stride;
    cfg.eval_stride = ssi.eval_stride;
    cfg.validate();
    const auto mode = kModes.at(ssi.mode);
    RunLog log("train-ssi");
    log.seed = seed;
    log.config = {{"model", models::spec_to_json(cfg.spec)}, {"preset", ssi.preset},
                  {"train", pipeline::train_config_json(cfg.train)}, {"silence_mode", ssi.mode},
                  {"vad_source", ssi.source}, {"vad_model", ssi.vad_model},
                  {"train_stride", ssi.train_stride}, {"eval_stride", ssi.eval_stride},
                  {"corpus", corpus.to_json()}};
    const auto c = corpus.load(pipeline::prep_for(kPresets.at(ssi.preset)));
    const auto labels = corpus_labels(c, kSources.at(ssi.source), ssi.vad_model);
    const auto stats = models::training_mel_stats(c);
    nn::Sequential model(Shape{1});
    const auto r = models::train_silence_mode(
        c, labels, stats, cfg, seed, mode, &model,
        [](std::uint64_t, align::SilenceMode, const models::EpochRecord& e) { print_epoch("ssi", e); });
    const fs::path wts = fs::path(out) / (std::string(models::kind_name(cfg.spec.kind)) + ".wts");
    models::save_model(wts, cfg.spec, model, 0.5, stats);
    eval::Report rep;
    rep.run_id = "train-ssi";
    rep.config = log.config;
    rep.metrics = pipeline::mode_json(r);
    const std::string text = "mse train " + eval::fmt(r.mse_train) + "  dev " +
                             eval::fmt(r.mse_dev) + "  test " + eval::fmt(r.mse_test) +
                             " (standardized)\nmcd test " + eval::fmt(r.mcd, 3) + " dB\n";
    pipeline::write_report(out, rep, text);
    log.write(out);
    std::cout << "saved " << wts << "\n" << text;
  }
};

struct EvalSsiCmd {
  CorpusOptions corpus;
  SsiOptions ssi;
  std::string model, split = "test", out;
  std::size_t audio = 0;
  int gl_iters = 60;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("eval-ssi", "Evaluate a spectral regression network");
    corpus.add(c);
    ssi.add(c, false);
    c->add_option("--model", model, "Trained network (.wts)")->required()->check(CLI::ExistingFile);
    c->add_option("--split", split, "Split to evaluate")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->capture_default_str();
    c->add_option("--audio", audio, "Resynthesize this many utterances with Griffin-Lim")
        ->capture_default_str();
    c->add_option("--gl-iters", gl_iters, "Griffin-Lim iterations")->capture_default_str();
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    auto m = models::load_model(model);
    if (!m.spec.is_ssi()) fail_validation(model, " is not a spectral regression network");
    if (!m.normalization) fail_validation(model, ": sidecar lacks normalization statistics");
    RunLog log("eval-ssi");
    log.config = {{"model", model}, {"split", split}, {"silence_mode", ssi.mode},
                  {"vad_source", ssi.source}, {"eval_stride", ssi.eval_stride},
                  {"corpus", corpus.to_json()}};
    models::PrepConfig prep;
    prep.image_height = m.spec.image_height();
    prep.image_width = m.spec.image_width();
    const auto c = corpus.load(prep);
    const auto labels = corpus_labels(c, kSources.at(ssi.source), ssi.vad_model);
    const auto& stats = *m.normalization;
    const std::size_t len = m.spec.window();
    const auto refs = models::window_refs(c, split, labels, kModes.at(ssi.mode), len, ssi.eval_stride);
    if (refs.empty()) fail_validation("no windows survive the silence filter on ", split);
    const auto data = models::window_dataset(c, refs, stats, len);
    const Matrix pred = models::predict_rows(m.model, data);
    double sq = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const Tensor t = data.target(i);
      for (std::size_t b = 0; b < models::kMelOutputs; ++b) sq += (pred(i, b) - t[b]) * (pred(i, b) - t[b]);
    }
    const double mse = sq / static_cast<double>(refs.size() * models::kMelOutputs);
    const double mcd = models::window_mcd(c, refs, pred, stats);

    std::size_t written = 0;
    for (std::size_t u : models::split_indices(c, split)) {
      if (written >= audio) break;
      const auto& utt = c[u];
      const auto mel = models::predict_melspec(m.model, utt.images,
                                               align::make_windows(utt.n_frames(), len), stats);
      dsp::MelConfig mc;
      mc.fps = utt.images.fps();
      dsp::write_wav(fs::path(out) / "audio" / (utt.id + ".wav"),
                     dsp::griffin_lim(dsp::destandardize(mel), mc, gl_iters, 0));
      ++written;
    }
    eval::Report rep;
    rep.run_id = "eval-ssi-" + split;
    rep.config = log.config;
    rep.metrics = {{"mse", mse}, {"mcd_db", mcd}, {"windows", refs.size()},
                   {"mse_units", "standardized mel"}, {"resynthesized", written}};
    const std::string text = split + ": mse " + eval::fmt(mse) + " (standardized), mcd " +
                             eval::fmt(mcd, 3) + " dB over " + std::to_string(refs.size()) +
                             " windows\n";
    pipeline::write_report(out, rep, text);
    log.write(out);
    std::cout << text;
  }
};

struct McdCmd {
  std::string ref, est, manifest, out;
  bool trend = false;
  std::vector<double> keep{0, 180, 360, 540};
  std::size_t limit = 20;
  int gl_iters = 60;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand(
        "mcd", "Mel-cepstral distortion between two recordings, or the retained-silence trend");
    c->add_option("--ref", ref, "Reference WAV")->check(CLI::ExistingFile);
    c->add_option("--est", est, "Estimated WAV")->check(CLI::ExistingFile);
    c->add_flag("--trend", trend, "Resynthesis MCD of end-silence variants over a corpus");
    c->add_option("--manifest", manifest, "Corpus for --trend")->check(CLI::ExistingFile);
    c->add_option("--keep", keep, "Retained silence steps in ms")->capture_default_str();
    c->add_option("--limit", limit, "Utterances used by --trend")->capture_default_str();
    c->add_option("--gl-iters", gl_iters, "Griffin-Lim iterations")->capture_default_str();
    c->add_option("--out", out, "Directory for report.json/report.txt");
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() const {
    RunLog log("mcd");
    eval::Report r;
    std::string text;
    if (trend) {
      if (manifest.empty()) fail_validation("--trend needs --manifest");
      std::vector<dsp::Waveform> audio;
      for (const auto& e : synth::read_manifest(manifest)) {
        if (audio.size() >= limit) break;
        audio.push_back(dsp::read_wav(e.wav));
      }
      const auto rows = pipeline::silence_trend(audio, keep, gl_iters);
      r.run_id = "silence-trend";
      r.config = {{"manifest", manifest}, {"keep_ms", keep}, {"utterances", audio.size()},
                  {"griffin_lim_iters", gl_iters}};
      eval::TextTable t({"condition", "mcd (dB)", "duration (s)"});
      r.metrics["conditions"] = Json::array();
      for (const auto& row : rows) {
        t.add_row({row.condition, eval::fmt(row.mcd, 3), eval::fmt(row.duration_s, 2)});
        r.metrics["conditions"].push_back({{"condition", row.condition},
                                           {"mcd_db", eval::mean_std_json(row.mcd)},
                                           {"duration_s", eval::mean_std_json(row.duration_s)}});
      }
      r.paper_refs["silence_config_mcd"] = {{"A", eval::reference::kSilenceConfigMcd[0]},
                                            {"B", eval::reference::kSilenceConfigMcd[1]},
                                            {"C", eval::reference::kSilenceConfigMcd[2]}};
      text = t.str();
    } else {
      if (ref.empty() || est.empty()) fail_validation("mcd needs --ref and --est, or --trend");
      const auto a = dsp::read_wav(ref), b = dsp::read_wav(est);
      if (a.sample_rate != b.sample_rate) fail_validation("sample rates differ");
      dsp::MelConfig mc;
      mc.sample_rate = a.sample_rate;
      auto ma = dsp::melspectrogram(a, mc), mb = dsp::melspectrogram(b, mc);
      const std::size_t n = std::min(ma.n_frames(), mb.n_frames());
      for (auto* m : {&ma, &mb}) {
        Matrix f(n, m->n_mels());
        for (std::size_t i = 0; i < n; ++i) std::copy_n(m->frames.row(i).begin(), m->n_mels(), f.row(i).begin());
        m->frames = std::move(f);
      }
      const double v = dsp::mcd(dsp::mel_cepstra(ma), dsp::mel_cepstra(mb));
      r.run_id = "mcd";
      r.config = {{"ref", ref}, {"est", est}};
      r.metrics = {{"mcd_db", v}, {"frames", n}};
      text = "mcd " + eval::fmt(v, 3) + " dB over " + std::to_string(n) + " frames\n";
    }
    std::cout << text;
    if (!out.empty()) {
      pipeline::write_report(out, r, text);
      log.config = r.config;
      log.write(out);
    }
  }
};

struct AblationCmd {
  CorpusOptions corpus{{}, 30, 5, 5, 0};
  TrainOptions train;
  std::string net = "both", preset = "reduced", source = "audio", vad_model, config, out;
  std::uint64_t seed = 1;
  std::size_t seeds = 3, train_stride = 1, eval_stride = 1;
  int vad_epochs = 30;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("ablation", "Silence removed vs 180 ms retained, per network");
    corpus.add(c);
    train.add(c);
    c->add_option("--net", net, "Network(s)")
        ->check(CLI::IsMember({"conv3d", "bilstm", "both"}))
        ->capture_default_str();
    c->add_option("--preset", preset, "Model preset")
        ->check(CLI::IsMember({"paper_exact", "reduced", "tiny"}))
        ->capture_default_str();
    c->add_option("--seed", seed, "First seed")->capture_default_str();
    c->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();
    c->add_option("--vad-source", source, "Labels used for silence filtering")
        ->check(CLI::IsMember({"audio", "image"}))
        ->capture_default_str();
    c->add_option("--vad-model", vad_model,
                  "Frame classifier for --vad-source image (trained on the corpus if omitted)")
        ->check(CLI::ExistingFile);
    c->add_option("--vad-epochs", vad_epochs, "Epochs when training the frame classifier here")
        ->capture_default_str();
    c->add_option("--train-stride", train_stride, "Use every n-th training window")
        ->capture_default_str();
    c->add_option("--eval-stride", eval_stride, "Use every n-th dev/test window")
        ->capture_default_str();
    c->add_option("--config", config, "JSON file overriding any of the options above")
        ->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  /// Keys: net, preset, seed, seeds, vad_source, vad_model, train_stride,
  /// eval_stride, max_epochs, patience, learning_rate, batch_size, corpus
  /// {train, dev, test, seed, manifest}.
  void apply_config() {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_file(config));
      if (!j.is_object()) fail_validation(config, ": expected a JSON object");
      static const std::set<std::string> known{
          "net", "preset", "seed", "seeds", "vad_source", "vad_model", "train_stride",
          "eval_stride", "max_epochs", "patience", "learning_rate", "batch_size", "corpus"};
      for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) fail_validation(config, ": unknown key '", k, "'");
      }
      net = j.value("net", net);
      preset = j.value("preset", preset);
      seed = j.value("seed", seed);
      seeds = j.value("seeds", seeds);
      source = j.value("vad_source", source);
      vad_model = j.value("vad_model", vad_model);
      train_stride = j.value("train_stride", train_stride);
      eval_stride = j.value("eval_stride", eval_stride);
      if (j.contains("max_epochs")) train.epochs = j["max_epochs"].get<int>();
      if (j.contains("patience")) train.patience = j["patience"].get<int>();
      if (j.contains("learning_rate")) train.lr = j["learning_rate"].get<double>();
      if (j.contains("batch_size")) train.batch = j["batch_size"].get<std::size_t>();
      if (j.contains("corpus")) {
        const auto& cj = j["corpus"];
        corpus.n_train = cj.value("train", corpus.n_train);
        corpus.n_dev = cj.value("dev", corpus.n_dev);
        corpus.n_test = cj.value("test", corpus.n_test);
        corpus.seed = cj.value("seed", corpus.seed);
        corpus.manifest = cj.value("manifest", corpus.manifest);
      }
    } catch (const nlohmann::json::exception& e) {
      fail_validation(config, ": ", e.what());
    }
    if (!kPresets.count(preset)) fail_validation("unknown preset '", preset, "'");
    if (!kSources.count(source)) fail_validation("unknown vad_source '", source, "'");
    if (net != "both" && !kSsiNets.count(net)) fail_validation("unknown net '", net, "'");
  }

  void run() {
    if (!config.empty()) apply_config();
    pipeline::AblationSetup setup;
    setup.nets = net == "both" ? std::vector{ModelKind::ssi_conv3d, ModelKind::ssi_conv3d_bilstm}
                               : std::vector{kSsiNets.at(net)};
    setup.preset = kPresets.at(preset);
    train.apply(setup.base.train);
    setup.base.seeds = seed_list(seed, seeds);
    setup.base.train_stride = train_stride;
    setup.base.eval_stride = eval_stride;
    setup.source = kSources.at(source);
    setup.validate();

    RunLog log("ablation");
    log.seed = seed;
    log.config = {{"net", net}, {"preset", preset}, {"seeds", setup.base.seeds},
                  {"vad_source", source}, {"vad_model", vad_model},
                  {"train", pipeline::train_config_json(setup.base.train)},
                  {"train_stride", train_stride}, {"eval_stride", eval_stride},
                  {"corpus", corpus.to_json()}};
    const auto c = corpus.load(pipeline::prep_for(setup.preset));

    std::optional<nn::Sequential> vad;
    if (setup.source == models::VadSource::image_vad) {
      if (!vad_model.empty()) {
        auto m = models::load_model(vad_model);
        vad = std::move(m.model);
      } else {
        pipeline::VadExperimentConfig vc;
        vc.spec = models::preset_spec(ModelKind::vad_cnn2d, setup.preset);
        vc.train.max_epochs = vad_epochs;
        vc.seeds = {seed};
        std::cerr << "training the frame classifier for image labels\n";
        pipeline::run_vad_experiment(c, vc, fs::path(out) / "vad",
                                     [](std::uint64_t, const models::EpochRecord& e) {
                                       print_epoch("vad", e);
                                     });
        vad = std::move(models::load_model(fs::path(out) / "vad" / pipeline::vad_model_file(seed)).model);
        log.config["vad_model"] = (fs::path(out) / "vad" / pipeline::vad_model_file(seed)).string();
      }
    }
    const auto res = pipeline::run_ablation(
        c, setup, vad ? &*vad : nullptr, out,
        [](std::uint64_t s, align::SilenceMode m, const models::EpochRecord& e) {
          print_epoch("seed " + std::to_string(s) + " " + mode_name(m), e);
        });
    log.write(out);
    std::cout << res.text;
  }
};

struct PaperReportCmd {
  std::string vad, ablation_audio, ablation_image, trend, out;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* c = app.add_subcommand("paper-report",
                                 "Collect run reports into the published table layouts");
    c->add_option("--vad", vad, "report.json of train-vad")->check(CLI::ExistingFile);
    c->add_option("--ablation", ablation_audio, "report.json of ablation with audio labels")
        ->check(CLI::ExistingFile);
    c->add_option("--ablation-image", ablation_image, "report.json of ablation with image labels")
        ->check(CLI::ExistingFile);
    c->add_option("--trend", trend, "report.json of mcd --trend")->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this, &action] { action = [this] { run(); }; });
  }

  static Json read(const std::string& path) {
    try {
      return Json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail_validation(path, ": ", e.what());
    }
  }

  static eval::MeanStd mean_std_from(const Json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("n").get<std::size_t>()};
  }

  static std::string ablation_section(const Json& rep, bool image) {
    std::vector<eval::AblationMeasuredRow> rows;
    for (const auto& n : rep.at("metrics").at("nets")) {
      auto cell = [](const Json& c) {
        return eval::AblationCell{mean_std_from(c.at("mse_dev")), mean_std_from(c.at("mse_test")),
                                  mean_std_from(c.at("mcd_db"))};
      };
      rows.push_back({n.at("net").get<std::string>(), cell(n.at("removed")), cell(n.at("keep180"))});
    }
    return eval::ablation_table(rows, image).str();
  }

  void run() const {
    RunLog log("paper-report");
    log.config = {{"vad", vad}, {"ablation", ablation_audio}, {"ablation_image", ablation_image},
                  {"trend", trend}};
    Json combined{{"fixtures", eval::fixture_report().to_json()}};
    std::string text = "Classification metrics of the published confusion matrices\n" +
                       eval::fixture_tables() + "\n";
    try {
      if (!trend.empty()) {
        const auto j = read(trend);
        combined["silence_trend"] = j;
        eval::TextTable t({"condition", "mcd (dB)"});
        for (const auto& c : j.at("metrics").at("conditions")) {
          t.add_row({c.at("condition").get<std::string>(), eval::fmt(mean_std_from(c.at("mcd_db")), 3)});
        }
        text += "Resynthesis MCD by end-silence handling\n" + t.str() + "\n";
      }
      if (!ablation_audio.empty()) {
        const auto j = read(ablation_audio);
        combined["ablation_audio_vad"] = j;
        text += "Silence ablation, audio VAD labels\n" + ablation_section(j, false) + "\n";
      }
      if (!vad.empty()) {
        const auto j = read(vad);
        combined["vad"] = j;
        const auto& m = j.at("metrics");
        auto cm = [](const Json& c) {
          return eval::ConfusionMatrix{c.at("tn").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                                       c.at("fn").get<std::uint64_t>(), c.at("tp").get<std::uint64_t>()};
        };
        const std::vector<std::pair<std::string, eval::ConfusionMatrix>> cms{
            {"dev (pooled)", cm(m.at("pooled_confusion").at("dev"))},
            {"test (pooled)", cm(m.at("pooled_confusion").at("test"))}};
        const auto dev = eval::classification_metrics(cms[0].second);
        const auto test = eval::classification_metrics(cms[1].second);
        const std::vector<eval::ClassificationColumn> cols{
            {"dev", dev, std::nullopt, eval::reference::kDevClassification},
            {"test", test, std::nullopt, eval::reference::kTestClassification}};
        text += "Frame classifier, pooled over seeds\n" + eval::classification_table(cols).str() +
                "\n" + eval::confusion_table(cms).str() + "\n";
      }
      if (!ablation_image.empty()) {
        const auto j = read(ablation_image);
        combined["ablation_image_vad"] = j;
        text += "Silence ablation, image VAD labels\n" + ablation_section(j, true);
        if (j.at("metrics").contains("dev_keep_disagreement")) {
          text += "Dev keep/drop disagreement with audio VAD: " +
                  eval::fmt(j["metrics"]["dev_keep_disagreement"].get<double>()) + "\n";
        }
      }
    } catch (const nlohmann::json::exception& e) {
      fail_validation("malformed report: ", e.what());
    }
    pipeline::write_json(fs::path(out) / "paper_report.json", combined);
    io::write_file_atomic(fs::path(out) / "paper_report.txt", text);
    log.write(out);
    std::cout << text;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ultrasound tongue image VAD and silent speech toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", utivad::pipeline::kVersion);

  std::function<void()> action;
  SynthCmd synth;
  VadAudioCmd vad_audio;
  LabelsCmd labels;
  PrepCmd prep;
  TrainVadCmd train_vad;
  EvalVadCmd eval_vad;
  TrainSsiCmd train_ssi;
  EvalSsiCmd eval_ssi;
  McdCmd mcd;
  AblationCmd ablation;
  PaperReportCmd paper_report;
  synth.add(app, action);
  vad_audio.add(app, action);
  labels.add(app, action);
  prep.add(app, action);
  train_vad.add(app, action);
  eval_vad.add(app, action);
  train_ssi.add(app, action);
  eval_ssi.add(app, action);
  mcd.add(app, action);
  ablation.add(app, action);
  paper_report.add(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 1;
  }

  try {
    utivad::warnings_enabled() = true;
    worker_cap();
    action();
    return 0;
  } catch (const utivad::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
}
