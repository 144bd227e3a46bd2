#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "utivad/nn/model.hpp"
#include "utivad/nn/optim.hpp"
#include "utivad/nn/wts.hpp"

namespace utivad::nn {
namespace {

using oracle::random_tensor;

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({5, 7, 1}, rng);
  Tensor k({1, 1, 1, 1}, 1.0);
  Tensor y = conv2d(x, k, Tensor({1}), {1, 1}, Padding::same);
  EXPECT_EQ(y, x);
}

TEST(Conv2d, SamePaddingKeepsSpatialShape) {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({64, 128, 1}, rng);
  Tensor k = random_tensor({3, 3, 1, 4}, rng);
  Tensor y = conv2d(x, k, Tensor({4}), {1, 1}, Padding::same);
  EXPECT_EQ(y.shape(), (Shape{64, 128, 4}));
}

TEST(Conv2d, MatchesDirectSumOracle) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({5, 5, 1}, rng);
  Tensor k = random_tensor({3, 3, 1, 2}, rng);
  Tensor b = random_tensor({2}, rng);
  EXPECT_LT(max_abs_diff(conv2d(x, k, b, {1, 1}, Padding::valid),
                         oracle::conv2d(x, k, b, 1, 1, false)),
            1e-12);
  // Strided same padding with an odd remainder exercises the bottom/right pad.
  Tensor x2 = random_tensor({7, 10, 3}, rng);
  Tensor k2 = random_tensor({4, 3, 3, 5}, rng);
  Tensor b2 = random_tensor({5}, rng);
  EXPECT_LT(max_abs_diff(conv2d(x2, k2, b2, {2, 3}, Padding::same),
                         oracle::conv2d(x2, k2, b2, 2, 3, true)),
            1e-12);
}

TEST(Conv2d, ShapeErrorsNameTheAxis) {
  Tensor x({4, 4, 2});
  Tensor k({3, 3, 1, 1});
  try {
    conv2d(x, k, Tensor({1}), {1, 1}, Padding::same);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
  }
  Tensor k2({5, 3, 2, 1});
  try {
    conv2d(x, k2, Tensor({1}), {1, 1}, Padding::valid);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
}

TEST(Conv3d, FirstSsiLayerShape) {
  Tensor x({25, 64, 128, 1});
  Tensor k({5, 13, 13, 1, 30});
  Tensor y = conv3d(x, k, Tensor({30}), {5, 2, 2}, Padding::same);
  EXPECT_EQ(y.shape(), (Shape{5, 32, 64, 30}));
}

TEST(Conv3d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({3, 4, 5, 1}, rng);
  Tensor y = conv3d(x, Tensor({1, 1, 1, 1, 1}, 1.0), Tensor({1}), {1, 1, 1},
                    Padding::valid);
  EXPECT_EQ(y, x);
}

TEST(Conv3d, MatchesDirectSumOracle) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({6, 4, 4, 1}, rng);
  Tensor k = random_tensor({2, 2, 2, 1, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  EXPECT_LT(max_abs_diff(conv3d(x, k, b, {1, 1, 1}, Padding::valid),
                         oracle::conv3d(x, k, b, 1, 1, 1, false)),
            1e-12);
  Tensor x2 = random_tensor({7, 9, 11, 2}, rng);
  Tensor k2 = random_tensor({3, 5, 4, 2, 3}, rng);
  EXPECT_LT(max_abs_diff(conv3d(x2, k2, b, {2, 2, 3}, Padding::same),
                         oracle::conv3d(x2, k2, b, 2, 2, 3, true)),
            1e-12);
}

TEST(MaxPool, SingleWindow) {
  Tensor x({2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  auto r = maxpool2d(x, {2, 2});
  EXPECT_EQ(r.output.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3u);
}

TEST(MaxPool, ShapeLawAndOddDims) {
  EXPECT_EQ(maxpool2d(Tensor({8, 16, 128}), {2, 2}).output.shape(),
            (Shape{4, 8, 128}));
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({5, 5, 1}, rng);
  auto r = maxpool2d(x, {2, 2});
  EXPECT_EQ(r.output.shape(), (Shape{2, 2, 1}));
  EXPECT_EQ(max_abs_diff(r.output, oracle::maxpool2d(x, 2, 2)), 0.0);
}

TEST(MaxPool, WindowLargerThanAxisIsError) {
  EXPECT_THROW(maxpool2d(Tensor({1, 4, 1}), {2, 2}), DimensionError);
  EXPECT_THROW(maxpool3d(Tensor({5, 1, 4, 3}), {1, 2, 2}), DimensionError);
}

TEST(Dense, IdentityAndHandSum) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({4}, rng);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  EXPECT_EQ(dense(x, eye, Tensor({4})), x);

  Tensor y = dense(Tensor({2}, {2.0, 3.0}), Tensor({2, 1}, {1.0, 1.0}),
                   Tensor({1}, {1.0}));
  EXPECT_EQ(y[0], 6.0);
}

TEST(Dense, MatchesDotProductOracle) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({10}, rng);
  Tensor w = random_tensor({10, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  EXPECT_LT(max_abs_diff(dense(x, w, b), oracle::dense(x, w, b)), 1e-12);
  EXPECT_THROW(dense(Tensor({9}), w, b), DimensionError);
}

TEST(BiLstm, ZeroWeightsGiveZeroOutput) {
  BiLSTM layer("lstm", 3, 4);
  Rng rng(0);
  Tensor y = layer.forward(random_tensor({5, 3}, rng), Mode::infer, rng);
  EXPECT_EQ(y, Tensor({8}));
}

TEST(BiLstm, SingleStepHalvesAgreeWithSharedWeights) {
  BiLSTM layer("lstm", 3, 2);
  Rng rng(9);
  auto ps = layer.params();
  for (int i = 0; i < 3; ++i) {
    ps[i]->value = random_tensor(ps[i]->value.shape(), rng);
    ps[i + 3]->value = ps[i]->value;
  }
  Tensor y = layer.forward(random_tensor({1, 3}, rng), Mode::infer, rng);
  EXPECT_EQ(y[0], y[2]);
  EXPECT_EQ(y[1], y[3]);
}

TEST(BiLstm, MatchesUnrolledOracle) {
  BiLSTM layer("lstm", 3, 2);
  Rng rng(10);
  for (Param* p : layer.params()) p->value = random_tensor(p->value.shape(), rng);
  Tensor x = random_tensor({3, 3}, rng);
  Tensor y = layer.forward(x, Mode::infer, rng);
  auto ps = layer.params();
  auto fw = oracle::lstm_final_h(x, ps[0]->value, ps[1]->value, ps[2]->value, 2, false);
  auto bw = oracle::lstm_final_h(x, ps[3]->value, ps[4]->value, ps[5]->value, 2, true);
  for (std::size_t u = 0; u < 2; ++u) {
    EXPECT_NEAR(y[u], fw[u], 1e-12);
    EXPECT_NEAR(y[2 + u], bw[u], 1e-12);
  }
  EXPECT_THROW(layer.forward(Tensor({1, 4}), Mode::infer, rng), DimensionError);
}

TEST(BiLstm, InitSetsForgetBiasToOne) {
  BiLSTM layer("lstm", 3, 2);
  Rng rng(1);
  layer.init(rng);
  const Tensor& b = layer.params()[2]->value;
  EXPECT_EQ(b[0], 0.0);
  EXPECT_EQ(b[2], 1.0);
  EXPECT_EQ(b[3], 1.0);
  EXPECT_EQ(b[4], 0.0);
}

TEST(Dropout, RateZeroAndInferAreIdentity) {
  Rng rng(11);
  Tensor x = random_tensor({100}, rng);
  Dropout none("d0", 0.0);
  EXPECT_EQ(none.forward(x, Mode::train, rng), x);
  Dropout d("d", 0.2);
  EXPECT_EQ(d.forward(x, Mode::infer, rng), x);
  EXPECT_THROW(Dropout("bad", 1.0), ValidationError);
}

TEST(Dropout, KeptFractionAndExpectation) {
  Rng rng(12);
  Dropout d("d", 0.2);
  Tensor x({100000}, 1.0);
  Tensor y = d.forward(x, Mode::train, rng);
  std::size_t kept = 0;
  double mean = 0.0;
  for (double v : y.data()) {
    kept += v != 0.0;
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  EXPECT_NEAR(static_cast<double>(kept) / y.size(), 0.8, 0.01);
  EXPECT_NEAR(mean, 1.0, 0.02);
}

TEST(Dropout, ExpectationOverTrialsMatchesInfer) {
  Rng rng(13);
  Dropout d("d", 0.2);
  Tensor x = random_tensor({16}, rng, 0.1, 1.0);
  Tensor acc({16});
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    Tensor y = d.forward(x, Mode::train, rng);
    for (std::size_t i = 0; i < 16; ++i) acc[i] += y[i];
  }
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(acc[i] / trials, x[i], 0.02 * x[i]) << "element " << i;
  }
}

TEST(Activations, Values) {
  Tensor x({2}, {-1.0, 2.0});
  Tensor r = activate(x, Activation::relu);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(40.0), 1.0, 1e-15);
  EXPECT_NEAR(sigmoid(-40.0), 0.0, 1e-15);
  EXPECT_GT(sigmoid(-40.0), 0.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_EQ(activate(x, Activation::linear), x);
}

TEST(Loss, BinaryCrossEntropy) {
  Tensor t({3}, {1.0, 0.0, 1.0});
  EXPECT_LE(bce_loss(t, t), -std::log(1.0 - kBceClamp) + 1e-18);
  EXPECT_NEAR(bce_loss(Tensor({3}, 0.5), t), std::log(2.0), 1e-15);
  const double expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
  EXPECT_NEAR(bce_loss(Tensor({2}, {0.9, 0.2}), Tensor({2}, {1.0, 0.0})), expected,
              1e-15);
  EXPECT_THROW(bce_loss(Tensor({1}, 0.5), Tensor({1}, 0.5)), ValidationError);
}

TEST(Loss, MeanSquaredError) {
  std::mt19937_64 rng(14);
  Tensor a = random_tensor({17}, rng);
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mse_loss(Tensor({2}), Tensor({2}, 1.0)), 1.0);
  Tensor b = random_tensor({17}, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 17; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(mse_loss(a, b), s / 17, 1e-12);
  EXPECT_THROW(mse_loss(a, Tensor({16})), DimensionError);
}

TEST(Optimizer, ZeroGradientLeavesParamsUnchanged) {
  for (auto state : {OptimizerState::sgd(0.1), OptimizerState::adam(0.1)}) {
    Param p("w", {3});
    p.value = Tensor({3}, {1.0, -2.0, 3.0});
    Tensor before = p.value;
    Param* ps[] = {&p};
    optimizer_step(ps, state);
    EXPECT_EQ(p.value, before);
    EXPECT_EQ(state.step, 1u);
  }
}

TEST(Optimizer, SgdStep) {
  Param p("w", {1});
  p.value[0] = 1.0;
  p.grad[0] = 1.0;
  auto state = OptimizerState::sgd(0.1);
  Param* ps[] = {&p};
  optimizer_step(ps, state);
  EXPECT_DOUBLE_EQ(p.value[0], 0.9);
}

TEST(Optimizer, AdamFirstStepMagnitudeIsLearningRate) {
  Param p("w", {1});
  p.grad[0] = 1.0;
  auto state = OptimizerState::adam(0.0002);
  Param* ps[] = {&p};
  optimizer_step(ps, state);
  EXPECT_NEAR(p.value[0], -0.0002, 1e-9);
  EXPECT_EQ(state.m[0].shape(), p.value.shape());
}

TEST(Optimizer, NonFiniteGradientNamesParameter) {
  Param p("conv1/kernel", {2});
  p.grad[1] = std::nan("");
  auto state = OptimizerState::adam(0.01);
  Param* ps[] = {&p};
  try {
    optimizer_step(ps, state);
    FAIL();
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("conv1/kernel"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(p.value[0], 0.0);
}

// ---- gradient verification for each layer type ----

GradCheckResult check_resampled(Sequential& model, LossKind loss, std::uint64_t seed,
                                const GradCheckOptions& opt = {}) {
  const auto r = checks::grad_check_resampled(model, loss, seed, opt);
  if (!r.found) ADD_FAILURE() << "could not find a kink-free evaluation point";
  return r.result;
}

TEST(GradCheck, LinearDenseIsExact) {
  Sequential m({6});
  m.add<Dense>("fc", 6, 3);
  auto r = check_resampled(m, LossKind::mse, 1);
  EXPECT_LT(r.max_rel_error, 1e-9) << r.worst_param;
  EXPECT_EQ(r.checked, 21u);
}

TEST(GradCheck, Conv2dReluPool) {
  Sequential m({6, 8, 2});
  m.add<Conv2D>("conv", 2, 3, std::array<std::size_t, 2>{3, 3},
                std::array<std::size_t, 2>{1, 1}, Padding::same);
  m.add<ActivationLayer>("relu", Activation::relu);
  m.add<MaxPool>("pool", std::vector<std::size_t>{2, 2});
  m.add<Flatten>("flat");
  m.add<Dense>("fc", 36, 1);
  m.add<ActivationLayer>("sig", Activation::sigmoid);
  auto r = check_resampled(m, LossKind::bce, 2);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST(GradCheck, StridedConv3dWithDropoutAndPool) {
  Sequential m({6, 9, 7, 2});
  m.add<Conv3D>("c1", 2, 3, std::array<std::size_t, 3>{2, 3, 3},
                std::array<std::size_t, 3>{2, 2, 1}, Padding::same);
  m.add<Dropout>("d1", 0.2);
  m.add<MaxPool>("p1", std::vector<std::size_t>{1, 2, 2});
  m.add<Conv3D>("c2", 3, 2, std::array<std::size_t, 3>{1, 2, 2},
                std::array<std::size_t, 3>{1, 1, 1}, Padding::valid);
  m.add<Flatten>("flat");
  m.add<Dense>("fc", m.shapes().back()[0], 4);
  GradCheckOptions opt;
  opt.mode = Mode::train;
  opt.dropout_seed = 77;
  auto r = check_resampled(m, LossKind::mse, 3, opt);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST(GradCheck, ReshapeBiLstmDense) {
  Sequential m({3, 2, 2, 2});
  m.add<Reshape>("reshape", Shape{3, 8});
  m.add<BiLSTM>("lstm", 8, 3);
  m.add<Dense>("fc", 6, 2);
  auto r = check_resampled(m, LossKind::mse, 4);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
}

TEST(Sequential, RejectsDuplicateNamesAndBadInput) {
  Sequential m({4});
  m.add<Dense>("fc", 4, 2);
  EXPECT_THROW(m.add<Dense>("fc", 2, 2), ValidationError);
  EXPECT_THROW(m.add<Dense>("fc2", 3, 2), DimensionError);
  Tensor bad({4});
  bad[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(m.forward(bad), RuntimeFailure);
  EXPECT_THROW(m.forward(Tensor({5})), DimensionError);
}

TEST(Sequential, SameSeedSameParameters) {
  auto build = [] {
    Sequential m({5});
    m.add<Dense>("a", 5, 4);
    m.add<Dense>("b", 4, 1);
    return m;
  };
  Sequential a = build(), b = build();
  a.init(42);
  b.init(42);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  b.init(43);
  EXPECT_NE(a.snapshot(), b.snapshot());
}

TEST(Wts, HeaderLayout) {
  std::string bytes = encode_wts({{"ab", Tensor({1, 2}, {1.0, -2.0})}});
  ASSERT_EQ(bytes.size(), 4u + 4 + 2 + 2 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "WTS1");
  EXPECT_EQ(bytes[4], 1);  // tensor count, little-endian
  EXPECT_EQ(bytes[8], 2);  // name length
  EXPECT_EQ(bytes.substr(10, 2), "ab");
  EXPECT_EQ(bytes[12], 2);  // ndim
  // 1.0f = 0x3F800000 little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x3F);
}

TEST(Wts, DecodeInvertsEncodeUpToSinglePrecision) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> ts;
    const int n = 1 + trial % 4;
    for (int k = 0; k < n; ++k) {
      Shape s;
      for (int d = 0; d <= (trial + k) % 4; ++d) s.push_back(1 + rng() % 5);
      ts.push_back({"t" + std::to_string(k), random_tensor(s, rng, -100, 100)});
    }
    auto back = decode_wts(encode_wts(ts));
    ASSERT_EQ(back.size(), ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
      EXPECT_EQ(back[k].name, ts[k].name);
      ASSERT_EQ(back[k].tensor.shape(), ts[k].tensor.shape());
      for (std::size_t i = 0; i < ts[k].tensor.size(); ++i) {
        EXPECT_EQ(back[k].tensor[i], static_cast<double>(static_cast<float>(ts[k].tensor[i])));
      }
    }
    // Re-encoding what was decoded is a fixed point.
    EXPECT_EQ(encode_wts(back), encode_wts(ts));
  }
}

TEST(Wts, RejectsCorruptInput) {
  EXPECT_THROW(decode_wts("WTS2\0\0\0\0"), ValidationError);
  std::string good = encode_wts({{"x", Tensor({3}, 1.0)}});
  EXPECT_THROW(decode_wts(good.substr(0, good.size() - 1)), ValidationError);
  EXPECT_THROW(decode_wts(good + "z"), ValidationError);
}

}  // namespace
}  // namespace utivad::nn
