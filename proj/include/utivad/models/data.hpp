#pragma once

// Training material shared by both network families: every utterance is
// reduced to model-resolution images, audio-VAD labels per ultrasound frame
// and log-mel frames aligned to the ultrasound clock.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "utivad/align/prep.hpp"
#include "utivad/align/uti.hpp"
#include "utivad/dsp/mel.hpp"
#include "utivad/dsp/wav.hpp"
#include "utivad/models/train.hpp"
#include "utivad/synth/corpus.hpp"
#include "utivad/vad/speech_vad.hpp"

namespace utivad::models {

struct PreparedUtterance {
  std::string id;
  std::string split;
  align::UtiSequence images;     // f32 at model resolution
  std::vector<int> audio_labels; // audio VAD, one per ultrasound frame
  dsp::MelTrack mel;             // raw log-mel, one row per ultrasound frame

  std::size_t n_frames() const noexcept { return images.n_frames(); }
};

using Corpus = std::vector<PreparedUtterance>;

struct PrepConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 64;
  vad::VadConfig vad;
  dsp::MelConfig mel;
};

/// Picks, for every ultrasound frame, the mel frame whose centre is nearest
/// to the ultrasound frame centre.
inline dsp::MelTrack align_mel_to_frames(const dsp::MelTrack& mel, std::size_t n_frames,
                                         double fps, int sample_rate, std::size_t hop) {
  if (mel.n_frames() == 0) fail_validation("cannot align an empty mel track");
  dsp::MelTrack out = mel;
  out.frames = Matrix(n_frames, mel.n_mels());
  out.fps = fps;
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double t = (i + 0.5) / fps;
    const double pos = t * sample_rate / static_cast<double>(hop) - 0.5;
    const auto j = static_cast<std::size_t>(
        std::clamp(std::lround(pos), 0L, static_cast<long>(mel.n_frames()) - 1));
    std::copy_n(mel.frames.row(j).begin(), mel.n_mels(), out.frames.row(i).begin());
  }
  return out;
}

inline PreparedUtterance prepare_utterance(const dsp::Waveform& audio,
                                           const align::UtiSequence& uti, std::string id,
                                           std::string split, const PrepConfig& cfg = {}) {
  if (audio.sample_rate != cfg.mel.sample_rate) {
    fail_validation(id, ": audio is ", audio.sample_rate, " Hz, mel analysis expects ",
                    cfg.mel.sample_rate);
  }
  PreparedUtterance p;
  p.id = std::move(id);
  p.split = std::move(split);
  p.images = align::prepare_sequence(uti, cfg.image_height, cfg.image_width);
  const auto track = vad::vad_decide(audio, cfg.vad);
  p.audio_labels =
      align::labels_from_vad(track, uti.fps(), static_cast<long>(uti.n_frames())).labels;
  dsp::MelConfig mc = cfg.mel;
  mc.fps = uti.fps();
  p.mel = align_mel_to_frames(dsp::melspectrogram(audio, mc), uti.n_frames(), uti.fps(),
                              mc.sample_rate, mc.hop());
  return p;
}

/// Generates and prepares a synthetic corpus one utterance at a time.
inline Corpus synth_corpus(const synth::CorpusSpec& spec, const PrepConfig& cfg = {},
                           const synth::SynthConfig& scfg = {}) {
  if (spec.n_train < 1 || spec.n_dev < 1 || spec.n_test < 1) {
    fail_validation("each split needs at least one utterance");
  }
  Corpus c;
  const std::size_t n = spec.n_train + spec.n_dev + spec.n_test;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [id, split] = synth::utterance_slot(spec, i);
    const auto u = synth::gen_utterance(synth::derive_seed(spec.seed, i), scfg, id);
    c.push_back(prepare_utterance(u.audio, u.uti, id, split, cfg));
  }
  return c;
}

inline Corpus load_corpus(const synth::Manifest& manifest, const PrepConfig& cfg = {}) {
  Corpus c;
  for (const auto& e : manifest) {
    c.push_back(prepare_utterance(dsp::read_wav(e.wav), align::read_utiz(e.uti), e.id, e.split,
                                  cfg));
  }
  return c;
}

inline std::vector<std::size_t> split_indices(const Corpus& c, const std::string& split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].split == split) out.push_back(i);
  }
  return out;
}

// ---- frame classification data ----

struct FrameRef {
  std::size_t utt = 0;
  std::size_t frame = 0;
};

/// Every stride-th frame of the split, counting across utterance borders.
inline std::vector<FrameRef> frame_refs(const Corpus& c, const std::string& split,
                                        std::size_t stride = 1) {
  if (stride == 0) fail_validation("frame stride must be positive");
  std::vector<FrameRef> out;
  std::size_t k = 0;
  for (std::size_t u : split_indices(c, split)) {
    for (std::size_t f = 0; f < c[u].n_frames(); ++f, ++k) {
      if (k % stride == 0) out.push_back({u, f});
    }
  }
  return out;
}

/// Image -> audio-VAD label samples. The corpus must outlive the dataset.
inline Dataset frame_dataset(const Corpus& c, std::vector<FrameRef> refs) {
  auto r = std::make_shared<std::vector<FrameRef>>(std::move(refs));
  const Corpus* cp = &c;
  return Dataset{r->size(),
                 [cp, r](std::size_t i) {
                   const auto& ref = (*r)[i];
                   return align::frame_tensor((*cp)[ref.utt].images, ref.frame);
                 },
                 [cp, r](std::size_t i) {
                   const auto& ref = (*r)[i];
                   return Tensor({1}, double((*cp)[ref.utt].audio_labels[ref.frame]));
                 }};
}

// ---- spectral regression data ----

struct WindowRef {
  std::size_t utt = 0;
  align::Window window;
};

/// Windows of the split whose centre frame survives the silence mode, given
/// per-utterance frame labels (indexed like the corpus), thinned to every
/// stride-th survivor.
inline std::vector<WindowRef> window_refs(const Corpus& c, const std::string& split,
                                          const std::vector<std::vector<int>>& labels,
                                          align::SilenceMode mode, std::size_t len = 25,
                                          std::size_t stride = 1) {
  if (labels.size() != c.size()) fail_validation("need one label track per utterance");
  if (stride == 0) fail_validation("window stride must be positive");
  std::vector<WindowRef> out;
  std::size_t k = 0;
  for (std::size_t u : split_indices(c, split)) {
    if (labels[u].size() != c[u].n_frames()) {
      fail_validation(c[u].id, ": ", labels[u].size(), " labels for ", c[u].n_frames(),
                      " frames");
    }
    const auto all = align::make_windows(c[u].n_frames(), len);
    for (const auto& w : align::filter_windows(all, labels[u], mode, c[u].images.fps())) {
      if (k++ % stride == 0) out.push_back({u, w});
    }
  }
  return out;
}

inline std::vector<double> standardized_row(const dsp::MelTrack& mel, std::size_t frame,
                                            const dsp::MelStats& stats) {
  std::vector<double> v(mel.n_mels());
  for (std::size_t b = 0; b < v.size(); ++b) {
    v[b] = (mel.frames(frame, b) - stats.mean[b]) / stats.stddev[b];
  }
  return v;
}

/// Window -> standardized mel frame at the window centre. The corpus must
/// outlive the dataset.
inline Dataset window_dataset(const Corpus& c, std::vector<WindowRef> refs,
                              const dsp::MelStats& stats, std::size_t len = 25) {
  auto r = std::make_shared<std::vector<WindowRef>>(std::move(refs));
  auto s = std::make_shared<dsp::MelStats>(stats);
  const Corpus* cp = &c;
  return Dataset{r->size(),
                 [cp, r, len](std::size_t i) {
                   const auto& ref = (*r)[i];
                   return align::window_tensor((*cp)[ref.utt].images, ref.window, len);
                 },
                 [cp, r, s](std::size_t i) {
                   const auto& ref = (*r)[i];
                   auto row = standardized_row((*cp)[ref.utt].mel, ref.window.center, *s);
                   const std::size_t n = row.size();
                   return Tensor({n}, std::move(row));
                 }};
}

/// Mel standardization statistics over every frame of the training split.
inline dsp::MelStats training_mel_stats(const Corpus& c) {
  std::vector<dsp::MelTrack> tracks;
  for (std::size_t u : split_indices(c, "train")) tracks.push_back(c[u].mel);
  if (tracks.empty()) fail_validation("corpus has no training utterances");
  return dsp::compute_stats(tracks);
}

inline std::vector<std::vector<int>> audio_labels(const Corpus& c) {
  std::vector<std::vector<int>> out;
  for (const auto& u : c) out.push_back(u.audio_labels);
  return out;
}

}  // namespace utivad::models
