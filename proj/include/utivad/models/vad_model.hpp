#pragma once

#include <string>
#include <vector>

#include "utivad/eval/metrics.hpp"
#include "utivad/models/data.hpp"

namespace utivad::models {

/// Speech probability and thresholded label for every frame of a prepared
/// (normalized, resized) sequence.
inline align::LabelTrack classify_frames(nn::Sequential& model, const align::UtiSequence& seq,
                                         double threshold = 0.5) {
  const Shape& in = model.input_shape();
  if (in.size() != 3 || in[2] != 1 || model.output_shape() != Shape{1}) {
    fail_validation("classify_frames needs a frame classifier, model input is ", shape_str(in));
  }
  if (seq.height() != in[0] || seq.width() != in[1]) {
    fail_validation("frames are ", seq.height(), "x", seq.width(), ", the model expects ", in[0],
                    "x", in[1]);
  }
  std::vector<double> p(seq.n_frames());
  for (std::size_t i = 0; i < seq.n_frames(); ++i) {
    p[i] = model.forward(align::frame_tensor(seq, i))[0];
  }
  return align::LabelTrack::from_probabilities(std::move(p), threshold);
}

/// Image-based labels for every utterance of the corpus.
inline std::vector<std::vector<int>> image_vad_labels(nn::Sequential& model, const Corpus& c,
                                                      double threshold = 0.5) {
  std::vector<std::vector<int>> out;
  for (const auto& u : c) out.push_back(classify_frames(model, u.images, threshold).labels);
  return out;
}

struct VadEvaluation {
  eval::ConfusionMatrix confusion;
  eval::ClassificationMetrics metrics;
  std::optional<double> auc;  // empty when one class is absent
  std::size_t frames = 0;
};

/// Frame classification quality on a split, against the audio-VAD labels.
inline VadEvaluation evaluate_vad(nn::Sequential& model, const Corpus& c,
                                  const std::string& split, double threshold = 0.5) {
  std::vector<int> labels, preds;
  std::vector<double> scores;
  for (std::size_t u : split_indices(c, split)) {
    const auto t = classify_frames(model, c[u].images, threshold);
    labels.insert(labels.end(), c[u].audio_labels.begin(), c[u].audio_labels.end());
    preds.insert(preds.end(), t.labels.begin(), t.labels.end());
    scores.insert(scores.end(), t.probabilities.begin(), t.probabilities.end());
  }
  if (labels.empty()) fail_validation("split '", split, "' has no frames");
  VadEvaluation ev;
  ev.confusion = eval::confusion(labels, preds);
  ev.metrics = eval::classification_metrics(ev.confusion);
  const bool both = ev.confusion.tp + ev.confusion.fn > 0 && ev.confusion.tn + ev.confusion.fp > 0;
  if (both) ev.auc = eval::roc_auc(labels, scores);
  ev.frames = labels.size();
  return ev;
}

/// Fraction of frames whose keep/drop decision differs between two label
/// sources under a silence mode.
inline double keep_decision_disagreement(const std::vector<std::vector<int>>& a,
                                         const std::vector<std::vector<int>>& b,
                                         align::SilenceMode mode, double fps) {
  if (a.size() != b.size()) fail_validation("label sources cover different utterance counts");
  std::size_t differ = 0, total = 0;
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (a[u].size() != b[u].size()) fail_validation("label tracks differ in length");
    const auto ka = align::keep_mask(a[u], mode, fps);
    const auto kb = align::keep_mask(b[u], mode, fps);
    for (std::size_t f = 0; f < ka.size(); ++f) differ += ka[f] != kb[f];
    total += ka.size();
  }
  if (total == 0) fail_validation("no frames to compare");
  return static_cast<double>(differ) / static_cast<double>(total);
}

}  // namespace utivad::models
