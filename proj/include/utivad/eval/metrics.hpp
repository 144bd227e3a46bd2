#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "utivad/core/error.hpp"

namespace utivad::eval {

/// Binary confusion counts; the positive class is speech.
struct ConfusionMatrix {
  std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;

  std::uint64_t total() const noexcept { return tn + fp + fn + tp; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> preds) {
  if (labels.size() != preds.size()) {
    fail_validation("confusion: ", labels.size(), " labels but ", preds.size(), " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] != 0, p = preds[i] != 0;
    if (y && p) ++cm.tp;
    else if (y) ++cm.fn;
    else if (p) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

/// Metrics with a zero denominator are left empty ("undefined").
struct ClassificationMetrics {
  std::optional<double> accuracy, precision, recall, f1, kappa;
};

inline ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  auto ratio = [](double num, double den) -> std::optional<double> {
    if (den == 0.0) return std::nullopt;
    return num / den;
  };
  const double tn = cm.tn, fp = cm.fp, fn = cm.fn, tp = cm.tp;
  const double n = tn + fp + fn + tp;
  ClassificationMetrics m;
  m.accuracy = ratio(tp + tn, n);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  if (m.precision && m.recall) m.f1 = ratio(2.0 * *m.precision * *m.recall, *m.precision + *m.recall);
  if (n > 0) {
    const double po = (tp + tn) / n;
    const double pe = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / (n * n);
    m.kappa = ratio(po - pe, 1.0 - pe);
  }
  return m;
}

/// Rank-based (Mann-Whitney) area under the ROC curve; tied scores share
/// their average rank.
inline double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) fail_validation("roc_auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        pos_rank_sum += rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail_validation("roc_auc needs both classes present");
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) fail_validation("mse needs equal non-empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

struct MeanStd {
  double mean = 0.0, stddev = 0.0;
  std::size_t n = 0;
};

/// Sample mean and (n-1) standard deviation.
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  r.n = v.size();
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return r;
}

}  // namespace utivad::eval
