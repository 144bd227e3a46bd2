#pragma once

// Run reports: JSON documents {run_id, config, metrics, paper_refs} plus
// aligned text tables and CSV for plotting. Published reference numbers are
// always shown next to measured values and labeled as not reproduced.

#include <array>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "utivad/eval/metrics.hpp"

namespace utivad::eval {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReferenceLabel = "published (not reproduced)";
inline constexpr const char* kMeasuredLabel = "measured";

namespace reference {

inline constexpr ConfusionMatrix kDevConfusion{2850, 1302, 502, 9295};
inline constexpr ConfusionMatrix kTestConfusion{1671, 1268, 418, 8096};

struct ClassificationRow {
  double accuracy, recall, precision, f1, auc, kappa;
};
inline constexpr ClassificationRow kDevClassification{0.87, 0.94, 0.877, 0.91, 0.894, 0.672};
inline constexpr ClassificationRow kTestClassification{0.852, 0.95, 0.864, 0.9, 0.859, 0.57};

struct AblationRow {
  const char* net;
  std::array<double, 3> removed;  // mse dev, mse test, mcd
  std::array<double, 3> kept;
};
inline constexpr std::array<AblationRow, 2> kAudioVadAblation{{
    {"ssi_conv3d", {0.46, 0.45, 3.20}, {0.30, 0.33, 3.29}},
    {"ssi_conv3d_bilstm", {0.39, 0.42, 3.08}, {0.259, 0.29, 3.13}},
}};
inline constexpr std::array<AblationRow, 2> kImageVadAblation{{
    {"ssi_conv3d", {0.436, 0.428, 3.15}, {0.38, 0.27, 3.28}},
    {"ssi_conv3d_bilstm", {0.393, 0.41, 3.05}, {0.35, 0.26, 3.12}},
}};

// Analysis-resynthesis MCD for the end-silence configurations A, B, C.
inline constexpr std::array<double, 3> kSilenceConfigMcd{1.55, 2.03, 1.34};

}  // namespace reference

// ---- JSON ----

inline Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json("undefined");
}

inline Json confusion_json(const ConfusionMatrix& cm) {
  return Json{{"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}};
}

inline Json metrics_json(const ClassificationMetrics& m, std::optional<double> auc = {}) {
  Json j;
  j["accuracy"] = optional_json(m.accuracy);
  j["precision"] = optional_json(m.precision);
  j["recall"] = optional_json(m.recall);
  j["f1"] = optional_json(m.f1);
  j["kappa"] = optional_json(m.kappa);
  j["roc_auc"] = optional_json(auc);
  return j;
}

inline Json reference_json(const reference::ClassificationRow& r) {
  return Json{{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
              {"f1", r.f1},             {"kappa", r.kappa},         {"roc_auc", r.auc}};
}

inline Json mean_std_json(const MeanStd& s) {
  return Json{{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
}

struct Report {
  std::string run_id;
  Json config = Json::object();
  Json metrics = Json::object();
  Json paper_refs = Json::object();

  Json to_json() const {
    return Json{{"run_id", run_id}, {"config", config}, {"metrics", metrics},
                {"paper_refs", paper_refs}};
  }
};

// ---- text tables ----

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) fail_validation("table row has the wrong column count");
    rows_.push_back(std::move(row));
  }
  std::size_t n_rows() const noexcept { return rows_.size(); }

  std::string str() const {
    std::vector<std::size_t> width(header_.size());
    auto grow = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    };
    grow(header_);
    for (const auto& r : rows_) grow(r);
    auto line = [&](const std::vector<std::string>& r) {
      std::string s;
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) s += "  ";
        s += r[c] + std::string(width[c] - r[c].size(), ' ');
      }
      while (!s.empty() && s.back() == ' ') s.pop_back();
      return s + "\n";
    };
    std::string out = line(header_);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    for (const auto& r : rows_) out += line(r);
    return out;
  }

  std::string csv() const {
    auto line = [](const std::vector<std::string>& r) {
      std::string s;
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) s += ",";
        const bool quote = r[c].find_first_of(",\"") != std::string::npos;
        if (!quote) {
          s += r[c];
          continue;
        }
        s += '"';
        for (char ch : r[c]) s += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        s += '"';
      }
      return s + "\n";
    };
    std::string out = line(header_);
    for (const auto& r : rows_) out += line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v, int digits = 4) {
  return v ? fmt(*v, digits) : std::string("undefined");
}

inline std::string fmt(const MeanStd& s, int digits = 4) {
  if (s.n == 0) return "-";
  if (s.n == 1) return fmt(s.mean, digits);
  return fmt(s.mean, digits) + " +- " + fmt(s.stddev, digits);
}

struct ClassificationColumn {
  std::string name;  // e.g. "dev", "test"
  ClassificationMetrics metrics;
  std::optional<double> auc;
  std::optional<reference::ClassificationRow> reference;
};

/// Metric rows, one measured column per split, each followed by its
/// published reference column when available.
inline TextTable classification_table(std::span<const ClassificationColumn> cols) {
  std::vector<std::string> header{"metric"};
  for (const auto& c : cols) {
    header.push_back(c.name + " " + kMeasuredLabel);
    if (c.reference) header.push_back(c.name + " " + kReferenceLabel);
  }
  TextTable t(header);
  using Getter = std::optional<double> (*)(const ClassificationColumn&);
  using RefGetter = double (*)(const reference::ClassificationRow&);
  const std::array<std::tuple<const char*, Getter, RefGetter>, 6> rows{{
      {"accuracy", [](const ClassificationColumn& c) { return c.metrics.accuracy; },
       [](const reference::ClassificationRow& r) { return r.accuracy; }},
      {"recall", [](const ClassificationColumn& c) { return c.metrics.recall; },
       [](const reference::ClassificationRow& r) { return r.recall; }},
      {"precision", [](const ClassificationColumn& c) { return c.metrics.precision; },
       [](const reference::ClassificationRow& r) { return r.precision; }},
      {"f1", [](const ClassificationColumn& c) { return c.metrics.f1; },
       [](const reference::ClassificationRow& r) { return r.f1; }},
      {"roc_auc", [](const ClassificationColumn& c) { return c.auc; },
       [](const reference::ClassificationRow& r) { return r.auc; }},
      {"kappa", [](const ClassificationColumn& c) { return c.metrics.kappa; },
       [](const reference::ClassificationRow& r) { return r.kappa; }},
  }};
  for (const auto& [name, get, ref] : rows) {
    std::vector<std::string> row{name};
    for (const auto& c : cols) {
      const auto v = get(c);
      row.push_back(v ? fmt(*v) : (std::string(name) == "roc_auc" ? "-" : "undefined"));
      if (c.reference) row.push_back(fmt(ref(*c.reference), 3));
    }
    t.add_row(std::move(row));
  }
  return t;
}

inline TextTable confusion_table(std::span<const std::pair<std::string, ConfusionMatrix>> cms) {
  TextTable t({"split", "actual", "pred negative", "pred positive"});
  for (const auto& [name, cm] : cms) {
    t.add_row({name, "negative", std::to_string(cm.tn), std::to_string(cm.fp)});
    t.add_row({name, "positive", std::to_string(cm.fn), std::to_string(cm.tp)});
  }
  return t;
}

struct AblationCell {
  MeanStd mse_dev, mse_test, mcd;
};

struct AblationMeasuredRow {
  std::string net;
  std::optional<AblationCell> removed, kept;
};

/// Rows per network: measured values, then the published reference row for
/// the chosen label source.
inline TextTable ablation_table(std::span<const AblationMeasuredRow> measured, bool image_vad) {
  TextTable t({"net", "source", "removed mse(dev)", "removed mse(test)", "removed mcd",
               "keep180 mse(dev)", "keep180 mse(test)", "keep180 mcd"});
  const auto& refs =
      image_vad ? reference::kImageVadAblation : reference::kAudioVadAblation;
  for (const auto& m : measured) {
    std::vector<std::string> row{m.net, kMeasuredLabel};
    for (const auto* cell : {&m.removed, &m.kept}) {
      if (*cell) {
        row.push_back(fmt((*cell)->mse_dev));
        row.push_back(fmt((*cell)->mse_test));
        row.push_back(fmt((*cell)->mcd, 3));
      } else {
        row.insert(row.end(), 3, "-");
      }
    }
    t.add_row(std::move(row));
    for (const auto& r : refs) {
      if (m.net != r.net) continue;
      std::vector<std::string> ref_row{m.net, kReferenceLabel};
      for (const auto& triple : {r.removed, r.kept}) {
        ref_row.push_back(fmt(triple[0], 3));
        ref_row.push_back(fmt(triple[1], 3));
        ref_row.push_back(fmt(triple[2], 2));
      }
      t.add_row(std::move(ref_row));
    }
  }
  return t;
}

/// Metrics of the two published confusion matrices, as a report.
inline Report fixture_report() {
  Report r;
  r.run_id = "fixtures-table6";
  r.config = Json{{"source", "embedded confusion matrices"}};
  for (const auto& [name, cm, ref] :
       {std::tuple{"dev", reference::kDevConfusion, reference::kDevClassification},
        std::tuple{"test", reference::kTestConfusion, reference::kTestClassification}}) {
    r.metrics[name] = metrics_json(classification_metrics(cm));
    r.metrics[name]["confusion"] = confusion_json(cm);
    r.paper_refs[name] = reference_json(ref);
  }
  return r;
}

inline std::string fixture_tables() {
  const auto dev = classification_metrics(reference::kDevConfusion);
  const auto test = classification_metrics(reference::kTestConfusion);
  const std::vector<ClassificationColumn> cols{
      {"dev", dev, std::nullopt, reference::kDevClassification},
      {"test", test, std::nullopt, reference::kTestClassification}};
  const std::vector<std::pair<std::string, ConfusionMatrix>> cms{
      {"dev", reference::kDevConfusion}, {"test", reference::kTestConfusion}};
  return classification_table(cols).str() + "\n" + confusion_table(cms).str();
}

}  // namespace utivad::eval
