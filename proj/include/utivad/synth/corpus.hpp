#pragma once

// Synthetic parallel corpus: audio, ultrasound-like tongue images and the
// ground-truth speech/silence segmentation, all from a single seed.
//
// The "tongue" is a bright parabolic arc on a speckle background. During
// silence it rests at a fixed pose; during speech its apex and curvature
// follow a smooth random trajectory inside a pose region that excludes the
// rest pose. The voice source is a 5-harmonic stack whose spectral tilt
// follows curvature and whose emphasised harmonic follows apex position. F0
// drifts on its own trajectory, so pitch is not recoverable from the images.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "utivad/align/uti.hpp"
#include "utivad/core/binio.hpp"
#include "utivad/dsp/wav.hpp"

namespace utivad::synth {

enum class SegmentKind { speech, silence };

struct Segment {
  double start = 0.0, end = 0.0;
  SegmentKind kind = SegmentKind::silence;

  double length() const noexcept { return end - start; }
};

struct UtteranceTruth {
  std::string id;
  double duration_s = 0.0;
  std::vector<Segment> segments;
  std::uint64_t seed = 0;

  bool speech_at(double t) const {
    for (const auto& s : segments) {
      if (t >= s.start && t < s.end) return s.kind == SegmentKind::speech;
    }
    return false;
  }
  /// 0/1 per frame of the given rate, judged at frame centres.
  std::vector<int> frame_labels(double rate, std::size_t n_frames) const {
    std::vector<int> out(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) out[i] = speech_at((i + 0.5) / rate);
    return out;
  }
};

struct SynthConfig {
  int sample_rate = 16000;
  double fps = align::kDefaultFps;
  std::size_t image_height = 48;
  std::size_t image_width = 96;
  double min_duration_s = 2.0;
  double max_duration_s = 6.0;
  int min_speech_segments = 2;
  int max_speech_segments = 3;
  double speech_min_s = 0.6, speech_max_s = 1.2;
  double gap_min_s = 0.2, gap_max_s = 0.4;
  double edge_min_s = 0.15, edge_max_s = 0.3;  // leading / trailing silence
  double speech_amplitude = 0.3;
  double noise_amplitude = 0.003;
  double ramp_ms = 20.0;
  double f0_min_hz = 100.0, f0_max_hz = 160.0;
  int harmonics = 5;
  double speckle_std = 18.0;
  bool all_silence = false;

  void validate() const {
    if (sample_rate <= 0 || !(fps > 0.0)) fail_validation("sample rate and fps must be positive");
    if (image_height < 8 || image_width < 8) fail_validation("images must be at least 8x8");
    if (!(min_duration_s >= 2.0 && max_duration_s <= 6.0 && min_duration_s <= max_duration_s)) {
      fail_validation("utterance durations must lie within [2, 6] s");
    }
    if (min_speech_segments < 1 || max_speech_segments < min_speech_segments) {
      fail_validation("bad speech segment count range");
    }
    for (auto [lo, hi] : {std::pair{speech_min_s, speech_max_s}, std::pair{gap_min_s, gap_max_s},
                          std::pair{edge_min_s, edge_max_s}}) {
      if (!(lo > 0.0 && lo <= hi)) fail_validation("bad segment length range");
    }
    if (harmonics < 1) fail_validation("need at least one harmonic");
    if (!(f0_min_hz > 0.0 && f0_min_hz < f0_max_hz)) fail_validation("bad F0 range");
    if (f0_max_hz * harmonics >= sample_rate / 2.0) fail_validation("harmonics exceed Nyquist");
  }
};

/// Articulatory state in normalized units.
struct Pose {
  double apex_y = 0.0;    // 0 = low, 1 = high
  double apex_x = 0.5;    // horizontal apex position, 0..1
  double curvature = 0.5; // 0..1
};

inline constexpr Pose kRestPose{0.2, 0.5, 0.35};

struct Utterance {
  dsp::Waveform audio;
  align::UtiSequence uti;
  UtteranceTruth truth;
};

/// splitmix64 mix of (corpus seed, index).
inline std::uint64_t derive_seed(std::uint64_t corpus_seed, std::uint64_t index) {
  std::uint64_t z = corpus_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<Segment> layout(const SynthConfig& cfg, Rng& rng) {
  std::vector<Segment> segs;
  double t = 0.0;
  auto add = [&](double len, SegmentKind kind) {
    segs.push_back({t, t + len, kind});
    t += len;
  };
  if (cfg.all_silence) {
    add(uniform(rng, cfg.min_duration_s, std::min(cfg.max_duration_s, 4.0)), SegmentKind::silence);
    return segs;
  }
  const int k = std::uniform_int_distribution<int>(cfg.min_speech_segments,
                                                   cfg.max_speech_segments)(rng);
  add(uniform(rng, cfg.edge_min_s, cfg.edge_max_s), SegmentKind::silence);
  for (int i = 0; i < k; ++i) {
    if (i) add(uniform(rng, cfg.gap_min_s, cfg.gap_max_s), SegmentKind::silence);
    add(uniform(rng, cfg.speech_min_s, cfg.speech_max_s), SegmentKind::speech);
  }
  const double trail = uniform(rng, cfg.edge_min_s, cfg.edge_max_s);
  // Stretch the last speech segment if the utterance would be too short, and
  // shrink it if too long.
  Segment& last = segs.back();
  const double total = t + trail;
  if (total < cfg.min_duration_s) last.end += cfg.min_duration_s - total;
  if (total > cfg.max_duration_s) last.end -= std::min(total - cfg.max_duration_s, last.length() / 2);
  t = last.end;
  add(trail, SegmentKind::silence);
  return segs;
}

/// Smooth trajectory in [0,1]: cubic interpolation between random knots.
class Trajectory {
 public:
  Trajectory(double duration, double knot_spacing, Rng& rng) : spacing_(knot_spacing) {
    const auto n = static_cast<std::size_t>(std::ceil(duration / knot_spacing)) + 4;
    knots_.resize(n);
    for (double& k : knots_) k = uniform(rng, 0.0, 1.0);
  }

  double operator()(double t) const {
    const double u = t / spacing_ + 1.0;
    const auto i = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(i);
    const double p0 = knots_[i - 1], p1 = knots_[i], p2 = knots_[i + 1], p3 = knots_[i + 2];
    // Catmull-Rom spline, clamped to [0, 1].
    const double v = 0.5 * (2 * p1 + (-p0 + p2) * f + (2 * p0 - 5 * p1 + 4 * p2 - p3) * f * f +
                            (-p0 + 3 * p1 - 3 * p2 + p3) * f * f * f);
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  double spacing_;
  std::vector<double> knots_;
};

struct SpeechMotion {
  Trajectory height, position, curvature;

  Pose at(double t) const {
    // Speech poses keep the apex at least 0.25 above the rest height.
    return {0.45 + 0.5 * height(t), 0.3 + 0.4 * position(t), 0.1 + 0.8 * curvature(t)};
  }
};

inline void render_frame(std::span<float> px, std::size_t H, std::size_t W, const Pose& p,
                         double speckle_std, Rng& rng) {
  std::normal_distribution<double> speckle(0.0, speckle_std);
  const double apex_row = (0.85 - 0.6 * p.apex_y) * static_cast<double>(H);
  const double apex_col = p.apex_x * static_cast<double>(W);
  const double bend = (0.5 + 3.0 * p.curvature) * static_cast<double>(H) /
                      (static_cast<double>(W) * static_cast<double>(W));
  const double thickness = 0.045 * static_cast<double>(H);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double dx = static_cast<double>(x) - apex_col;
      const double curve_row = apex_row + bend * dx * dx;
      const double d = (static_cast<double>(y) - curve_row) / thickness;
      const double v = 50.0 + 170.0 * std::exp(-0.5 * d * d) + speckle(rng);
      px[y * W + x] = static_cast<float>(std::clamp(std::round(v), 0.0, 255.0));
    }
}

}  // namespace detail

inline Utterance gen_utterance(std::uint64_t seed, const SynthConfig& cfg = {},
                               std::string id = "utt") {
  cfg.validate();
  detail::Rng rng(seed);
  Utterance u;
  u.truth.id = std::move(id);
  u.truth.seed = seed;
  u.truth.segments = detail::layout(cfg, rng);
  u.truth.duration_s = u.truth.segments.back().end;
  const double duration = u.truth.duration_s;

  const detail::SpeechMotion motion{detail::Trajectory(duration, 0.15, rng),
                                    detail::Trajectory(duration, 0.25, rng),
                                    detail::Trajectory(duration, 0.2, rng)};
  auto pose_at = [&](double t) { return u.truth.speech_at(t) ? motion.at(t) : kRestPose; };
  const detail::Trajectory pitch(duration, 0.3, rng);

  // Audio.
  const int sr = cfg.sample_rate;
  const auto n_samples = static_cast<std::size_t>(std::lround(duration * sr));
  u.audio = dsp::Waveform{std::vector<double>(n_samples), sr};
  std::normal_distribution<double> noise(0.0, cfg.noise_amplitude);
  const double ramp = cfg.ramp_ms / 1000.0;
  std::vector<double> phase(static_cast<std::size_t>(cfg.harmonics), 0.0);
  for (auto& ph : phase) ph = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / sr;
    double v = noise(rng);
    const Pose p = motion.at(t);
    const double f0 = cfg.f0_min_hz + (cfg.f0_max_hz - cfg.f0_min_hz) * pitch(t);
    for (int k = 0; k < cfg.harmonics; ++k) {
      phase[k] += 2.0 * std::numbers::pi * f0 * (k + 1) / sr;
      if (phase[k] > 2.0 * std::numbers::pi) phase[k] -= 2.0 * std::numbers::pi;
    }
    for (const auto& seg : u.truth.segments) {
      if (seg.kind != SegmentKind::speech || t < seg.start || t >= seg.end) continue;
      const double env = std::min({1.0, (t - seg.start) / ramp, (seg.end - t) / ramp});
      // Spectral tilt from curvature, emphasis of one harmonic from apex_x.
      double s = 0.0, norm = 0.0;
      const double focus = 1.0 + (cfg.harmonics - 1) * (p.apex_x - 0.3) / 0.4;
      for (int k = 0; k < cfg.harmonics; ++k) {
        const double tilt = std::exp(-(0.2 + 1.2 * p.curvature) * k);
        const double peak = 1.0 + 1.5 * std::exp(-0.5 * std::pow((k + 1 - focus) / 0.8, 2));
        const double w = tilt * peak;
        s += w * std::sin(phase[k]);
        norm += w;
      }
      v += cfg.speech_amplitude * env * s / norm;
    }
    u.audio.samples[i] = v;
  }

  // Ultrasound.
  const auto n_frames = static_cast<std::size_t>(std::lround(duration * cfg.fps));
  u.uti = align::UtiSequence(n_frames, cfg.image_height, cfg.image_width, cfg.fps,
                             align::PixelType::u8);
  for (std::size_t f = 0; f < n_frames; ++f) {
    detail::render_frame(u.uti.frame(f), cfg.image_height, cfg.image_width,
                         pose_at((f + 0.5) / cfg.fps), cfg.speckle_std, rng);
  }
  return u;
}

/// The speckle-free rest-pose image, used to check silence frames.
inline std::vector<float> rest_image(const SynthConfig& cfg = {}) {
  std::vector<float> px(cfg.image_height * cfg.image_width);
  detail::Rng rng(0);
  detail::render_frame(px, cfg.image_height, cfg.image_width, kRestPose, 0.0, rng);
  return px;
}

struct Agreement {
  std::size_t agree = 0, counted = 0;
  double rate() const { return counted ? static_cast<double>(agree) / counted : 0.0; }
};

/// Frame-level agreement of per-frame decisions (at `rate` frames/s) with the
/// truth, skipping frames within one frame of a truth boundary.
inline Agreement agreement_with_truth(const std::vector<int>& decisions, double rate,
                                      const UtteranceTruth& truth) {
  const auto t = truth.frame_labels(rate, decisions.size());
  Agreement a;
  for (std::size_t f = 0; f < t.size(); ++f) {
    bool near = false;
    for (std::size_t g = f == 0 ? 1 : f; g <= f + 1 && g < t.size(); ++g) near |= t[g] != t[g - 1];
    if (near) continue;
    ++a.counted;
    a.agree += (decisions[f] != 0) == (t[f] != 0);
  }
  return a;
}

// ---- truth JSON ----

inline const char* kind_name(SegmentKind k) {
  return k == SegmentKind::speech ? "speech" : "silence";
}

inline nlohmann::ordered_json truth_to_json(const UtteranceTruth& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["duration_s"] = t.duration_s;
  j["segments"] = nlohmann::ordered_json::array();
  for (const auto& s : t.segments) {
    j["segments"].push_back({{"start", s.start}, {"end", s.end}, {"kind", kind_name(s.kind)}});
  }
  j["seed"] = t.seed;
  return j;
}

inline UtteranceTruth truth_from_json(const nlohmann::json& j) {
  UtteranceTruth t;
  try {
    t.id = j.at("id").get<std::string>();
    t.duration_s = j.at("duration_s").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("segments")) {
      const auto kind = s.at("kind").get<std::string>();
      if (kind != "speech" && kind != "silence") fail_validation("unknown segment kind ", kind);
      t.segments.push_back({s.at("start").get<double>(), s.at("end").get<double>(),
                            kind == "speech" ? SegmentKind::speech : SegmentKind::silence});
    }
  } catch (const nlohmann::json::exception& e) {
    fail_validation("malformed truth JSON: ", e.what());
  }
  return t;
}

// ---- corpus on disk ----

struct ManifestEntry {
  std::string id;
  std::filesystem::path wav, uti, truth;
  std::string split;  // train | dev | test
};

using Manifest = std::vector<ManifestEntry>;

inline nlohmann::ordered_json manifest_to_json(const Manifest& m,
                                               const std::filesystem::path& base) {
  auto rel = [&](const std::filesystem::path& p) {
    return p.lexically_relative(base).generic_string();
  };
  auto j = nlohmann::ordered_json::array();
  for (const auto& e : m) {
    j.push_back({{"id", e.id}, {"wav", rel(e.wav)}, {"uti", rel(e.uti)},
                 {"truth", rel(e.truth)}, {"split", e.split}});
  }
  return j;
}

/// Reads a manifest; relative paths resolve against the manifest's folder.
inline Manifest read_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    if (!j.is_array()) fail_validation(path.string(), ": manifest must be a JSON array");
    for (const auto& e : j) {
      ManifestEntry entry{e.at("id").get<std::string>(), base / e.at("wav").get<std::string>(),
                          base / e.at("uti").get<std::string>(),
                          base / e.at("truth").get<std::string>(),
                          e.at("split").get<std::string>()};
      if (entry.split != "train" && entry.split != "dev" && entry.split != "test") {
        fail_validation(path.string(), ": unknown split '", entry.split, "'");
      }
      m.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    fail_validation(path.string(), ": malformed manifest: ", e.what());
  }
  return m;
}

struct CorpusSpec {
  std::size_t n_train = 80, n_dev = 10, n_test = 10;
  std::uint64_t seed = 0;
};

/// Id and split of the i-th utterance; utterances are numbered train first.
inline std::pair<std::string, std::string> utterance_slot(const CorpusSpec& spec,
                                                          std::size_t i) {
  const char* split = i < spec.n_train ? "train" : i < spec.n_train + spec.n_dev ? "dev" : "test";
  char id[32];
  std::snprintf(id, sizeof id, "%s_%04zu", split, i);
  return {id, split};
}

/// Generates every utterance of the corpus in memory, in manifest order.
inline std::vector<Utterance> gen_corpus_in_memory(const CorpusSpec& spec,
                                                   const SynthConfig& cfg = {}) {
  if (spec.n_train < 1 || spec.n_dev < 1 || spec.n_test < 1) {
    fail_validation("each split needs at least one utterance");
  }
  std::vector<Utterance> out;
  const std::size_t n = spec.n_train + spec.n_dev + spec.n_test;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(gen_utterance(derive_seed(spec.seed, i), cfg, utterance_slot(spec, i).first));
  }
  return out;
}

/// Writes wav/, uti/, truth/ and manifest.json under out_dir.
inline Manifest gen_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                           const SynthConfig& cfg = {}) {
  if (spec.n_train < 1 || spec.n_dev < 1 || spec.n_test < 1) {
    fail_validation("each split needs at least one utterance");
  }
  Manifest m;
  const std::size_t n = spec.n_train + spec.n_dev + spec.n_test;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [id, split] = utterance_slot(spec, i);
    const Utterance u = gen_utterance(derive_seed(spec.seed, i), cfg, id);
    ManifestEntry e{id, out_dir / "wav" / (id + ".wav"), out_dir / "uti" / (id + ".utiz"),
                    out_dir / "truth" / (id + ".json"), split};
    dsp::write_wav(e.wav, u.audio);
    align::write_utiz(e.uti, u.uti);
    io::write_file_atomic(e.truth, truth_to_json(u.truth).dump(2) + "\n");
    m.push_back(std::move(e));
  }
  io::write_file_atomic(out_dir / "manifest.json", manifest_to_json(m, out_dir).dump(2) + "\n");
  return m;
}

}  // namespace utivad::synth
