#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "utivad/eval/report.hpp"

namespace utivad::eval {
namespace {

TEST(Confusion, Basics) {
  std::vector<int> y{0, 1, 1, 0, 1};
  EXPECT_EQ(confusion(y, y), (ConfusionMatrix{2, 0, 0, 3}));
  std::vector<int> inv{1, 0, 0, 1, 0};
  const auto cm = confusion(y, inv);
  EXPECT_EQ(cm.tp, 0u);
  EXPECT_EQ(cm.tn, 0u);
  EXPECT_THROW(confusion(y, std::vector<int>{1}), ValidationError);
}

TEST(Confusion, ReconstructsPublishedTestMatrix) {
  std::vector<int> y, p;
  auto push = [&](int label, int pred, int n) {
    for (int i = 0; i < n; ++i) {
      y.push_back(label);
      p.push_back(pred);
    }
  };
  push(0, 0, 1671);
  push(0, 1, 1268);
  push(1, 0, 418);
  push(1, 1, 8096);
  EXPECT_EQ(confusion(y, p), reference::kTestConfusion);
}

TEST(ClassificationMetrics, PublishedTestMatrix) {
  const auto m = classification_metrics(reference::kTestConfusion);
  EXPECT_NEAR(*m.accuracy, 0.8528, 5e-5);
  EXPECT_NEAR(*m.precision, 0.8646, 5e-5);
  EXPECT_NEAR(*m.recall, 0.9509, 5e-5);
  EXPECT_NEAR(*m.f1, 0.9057, 5e-5);
  EXPECT_NEAR(*m.kappa, 0.5738, 5e-5);
  const auto& r = reference::kTestClassification;
  EXPECT_NEAR(*m.accuracy, r.accuracy, 0.005);
  EXPECT_NEAR(*m.precision, r.precision, 0.005);
  EXPECT_NEAR(*m.recall, r.recall, 0.005);
  EXPECT_NEAR(*m.f1, r.f1, 0.01);  // published to one decimal
  EXPECT_NEAR(*m.kappa, r.kappa, 0.005);
}

TEST(ClassificationMetrics, PublishedDevMatrix) {
  const auto m = classification_metrics(reference::kDevConfusion);
  EXPECT_NEAR(*m.accuracy, 0.8707, 5e-5);
  EXPECT_NEAR(*m.precision, 0.8771, 5e-5);
  // po = 12145/13949, pe = 117736313/13949^2.
  EXPECT_NEAR(*m.kappa, 0.67251, 5e-5);
  // The published recall (0.94) disagrees with its own confusion matrix.
  EXPECT_NEAR(*m.recall, 0.9488, 5e-5);
  EXPECT_NEAR(*m.f1, 0.91, 0.005);
  const auto& r = reference::kDevClassification;
  EXPECT_NEAR(*m.accuracy, r.accuracy, 0.005);
  EXPECT_NEAR(*m.precision, r.precision, 0.005);
  EXPECT_NEAR(*m.kappa, r.kappa, 0.005);
}

TEST(ClassificationMetrics, PerfectAndUndefined) {
  const auto m = classification_metrics({40, 0, 0, 60});
  for (const auto& v : {m.accuracy, m.precision, m.recall, m.f1, m.kappa}) EXPECT_EQ(*v, 1.0);

  const auto none_predicted = classification_metrics({10, 0, 5, 0});
  EXPECT_FALSE(none_predicted.precision.has_value());
  EXPECT_FALSE(none_predicted.f1.has_value());
  EXPECT_EQ(*none_predicted.recall, 0.0);

  const auto empty = classification_metrics({});
  EXPECT_FALSE(empty.accuracy.has_value());
  EXPECT_FALSE(empty.kappa.has_value());

  // All one class, all predicted that class: pe == 1.
  EXPECT_FALSE(classification_metrics({0, 0, 0, 9}).kappa.has_value());
  EXPECT_EQ(optional_json(std::nullopt), Json("undefined"));
}

TEST(ClassificationMetrics, ScaleInvarianceProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm{1 + rng() % 500, rng() % 500, rng() % 500, 1 + rng() % 500};
    const std::uint64_t k = 1 + rng() % 50;
    const auto a = classification_metrics(cm);
    const auto b = classification_metrics({cm.tn * k, cm.fp * k, cm.fn * k, cm.tp * k});
    EXPECT_NEAR(*a.accuracy, *b.accuracy, 1e-12);
    EXPECT_NEAR(*a.precision, *b.precision, 1e-12);
    EXPECT_NEAR(*a.recall, *b.recall, 1e-12);
    EXPECT_NEAR(*a.f1, *b.f1, 1e-12);
    EXPECT_NEAR(*a.kappa, *b.kappa, 1e-12);
  }
}

TEST(ClassificationMetrics, KappaBoundsProperty) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm{1 + rng() % 300, rng() % 300, rng() % 300, 1 + rng() % 300};
    const auto m = classification_metrics(cm);
    const double n = static_cast<double>(cm.total());
    const double pe = ((cm.tp + cm.fp) * double(cm.tp + cm.fn) + (cm.tn + cm.fn) * double(cm.tn + cm.fp)) / (n * n);
    if (*m.accuracy > pe) {
      EXPECT_LE(*m.kappa, *m.accuracy + 1e-12);
    }
  }
  // Independent predictions: rows proportional to the prediction marginal.
  EXPECT_NEAR(*classification_metrics({300, 100, 600, 200}).kappa, 0.0, 1e-12);
  EXPECT_NEAR(*classification_metrics({30, 70, 30, 70}).kappa, 0.0, 1e-12);
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<int>{0, 1, 0, 1}, std::vector<double>(4, 0.3)), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8}), 0.75);
  EXPECT_DOUBLE_EQ(oracle::auc_pairs({0, 0, 1, 1}, {0.1, 0.4, 0.35, 0.8}), 0.75);
  EXPECT_THROW(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), ValidationError);
  EXPECT_THROW(roc_auc(std::vector<int>{1, 0}, std::vector<double>{0.1}), ValidationError);
}

TEST(RocAuc, MatchesPairEnumerationWithTiesProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng() % 3 != 0;
      s[i] = static_cast<double>(rng() % 20) / 20.0;  // plenty of ties
    }
    y[0] = 0;
    y[1] = 1;
    const double auc = roc_auc(y, s);
    EXPECT_NEAR(auc, oracle::auc_pairs(y, s), 1e-12);
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_NEAR(roc_auc(y, warped), auc, 1e-12);
  }
}

TEST(Mse, Basics) {
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{1, 2}, std::vector<double>{1, 4}), 2.0);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), ValidationError);
  const auto ms = mean_std(std::vector<double>{1, 2, 3});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.stddev, 1.0);
}

TEST(Report, EmptyAndSingle) {
  Report empty;
  const auto j = empty.to_json();
  EXPECT_EQ(j.size(), 4u);
  EXPECT_TRUE(j["metrics"].empty());
  EXPECT_EQ(ablation_table({}, false).n_rows(), 0u);

  std::vector<ClassificationColumn> one{{"test", classification_metrics({5, 1, 2, 9}), 0.8, std::nullopt}};
  const auto t = classification_table(one);
  EXPECT_EQ(t.n_rows(), 6u);
}

TEST(Report, FixtureReportReproducesCrossCheck) {
  const auto j = fixture_report().to_json();
  EXPECT_EQ(j["run_id"], "fixtures-table6");
  EXPECT_NEAR(j["metrics"]["test"]["accuracy"].get<double>(), 0.8528, 5e-5);
  EXPECT_NEAR(j["metrics"]["test"]["kappa"].get<double>(), 0.5738, 5e-5);
  EXPECT_NEAR(j["metrics"]["dev"]["kappa"].get<double>(), 0.67251, 5e-5);
  EXPECT_EQ(j["metrics"]["dev"]["roc_auc"], "undefined");
  EXPECT_EQ(j["paper_refs"]["dev"]["recall"].get<double>(), 0.94);
  const auto text = fixture_tables();
  EXPECT_NE(text.find("0.8528"), std::string::npos);
  EXPECT_NE(text.find("0.5738"), std::string::npos);
  EXPECT_NE(text.find(kReferenceLabel), std::string::npos);
  EXPECT_NE(text.find("8096"), std::string::npos);
  // Deterministic key order.
  EXPECT_EQ(j.begin().key(), "run_id");
  EXPECT_EQ(fixture_report().to_json().dump(), j.dump());
}

TEST(Report, AblationTableShowsReferenceRows) {
  std::vector<AblationMeasuredRow> rows{
      {"ssi_conv3d_bilstm", AblationCell{{0.5, 0.1, 3}, {0.6, 0.0, 1}, {4.2, 0.3, 3}}, std::nullopt}};
  const auto t = ablation_table(rows, false);
  EXPECT_EQ(t.n_rows(), 2u);
  const auto s = t.str();
  EXPECT_NE(s.find("3.08"), std::string::npos);
  EXPECT_NE(s.find("0.5000 +- 0.1000"), std::string::npos);
  EXPECT_NE(ablation_table(rows, true).str().find("3.05"), std::string::npos);
}

TEST(TextTable, CsvQuoting) {
  TextTable t({"a", "b"});
  t.add_row({"x,y", "say \"hi\""});
  EXPECT_EQ(t.csv(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  EXPECT_THROW(t.add_row({"only one"}), ValidationError);
}

}  // namespace
}  // namespace utivad::eval
