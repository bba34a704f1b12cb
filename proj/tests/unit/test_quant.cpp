#include <gtest/gtest.h>

#include <cmath>

#include "analognas/nn/quant.hpp"

using namespace analognas;
using namespace analognas::nn;

namespace {

struct Trained {
  DatasetPair data;
  Network<float> net;
};

Trained trained(std::uint64_t seed = 1) {
  SynthSpec s;
  s.train_size = 300;
  s.test_size = 100;
  Trained t{synth_dataset(s, seed), Network<float>(space::encode(9877), MacroConfig::desk(), seed)};
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 2;
  sgd_train(t.net, t.data.train, tc);
  return t;
}

}  // namespace

TEST(Quant, WeightRoundingBound) {
  Rng rng(3);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> w(1000);
  for (float& v : w) v = g(rng);
  const auto orig = w;
  const float s = symmetric_scale(w, 8);
  fake_quantize_symmetric(w, s, 8);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(w[i] - orig[i]), s / 2 * (1 + 1e-6f));
  // Already on the grid: exact round trip.
  const auto once = w;
  fake_quantize_symmetric(w, symmetric_scale(w, 8), 8);
  EXPECT_EQ(w, once);
}

TEST(Quant, ZeroTensorScaleIsOne) {
  std::vector<float> w(10, 0.0f);
  EXPECT_EQ(symmetric_scale(w, 8), 1.0f);
}

TEST(Quant, AffineContainsZeroAndClips) {
  const auto q = AffineQuant::from_range(0.5f, 3.0f, 8);
  EXPECT_LE(q.lower(), 0.0f);
  EXPECT_GE(q.upper(), 3.0f - q.scale);
  EXPECT_EQ(q.apply(0.0f), 0.0f);
  EXPECT_FLOAT_EQ(q.apply(100.0f), q.upper());
}

TEST(Quant, PtqIsIdempotent) {
  auto t = trained();
  const auto q1 = ptq_int8(t.net, t.data.train);
  const auto q2 = ptq_int8(q1.net, t.data.train);
  const auto u1 = q1.net.units(), u2 = q2.net.units();
  for (std::size_t i = 0; i < u1.size(); ++i) EXPECT_EQ(u1[i]->weight().value, u2[i]->weight().value);
  EXPECT_EQ(evaluate_accuracy(q1, t.data.test), evaluate_accuracy(q2, t.data.test));
}

TEST(Quant, PtqCloseToBaseline) {
  auto t = trained();
  const double base = evaluate_accuracy(t.net, t.data.test);
  const double ptq = evaluate_accuracy(ptq_int8(t.net, t.data.train), t.data.test);
  EXPECT_NEAR(ptq, base, 0.05);
}

TEST(Quant, QatZeroEpochsEqualsPtq) {
  auto t = trained();
  Network<float> copy = t.net;
  QatConfig cfg;
  cfg.epochs = 0;
  qat_train(copy, t.data.train, cfg);
  EXPECT_EQ(evaluate_accuracy(ptq_int8(copy, t.data.train), t.data.test),
            evaluate_accuracy(ptq_int8(t.net, t.data.train), t.data.test));
}

TEST(Quant, StraightThroughMask) {
  FakeQuantHook hook(1, QuantScheme{}, 0.0);
  ConvUnit<float> unit({1, 1, 1, 1, 0}, false, false, "u");
  // First call calibrates the range to [-1, 1]; zero momentum freezes it.
  std::vector<float> calib{-1.0f, 1.0f};
  std::vector<std::uint8_t> pass(2, 1);
  hook.input(unit, calib, pass);
  std::vector<float> x{0.3f, 5.0f, -0.2f, -7.0f};
  std::vector<std::uint8_t> mask(4, 1);
  hook.input(unit, x, mask);
  EXPECT_EQ(mask[0], 1);
  EXPECT_EQ(mask[2], 1);
  EXPECT_EQ(mask[1], 0);
  EXPECT_EQ(mask[3], 0);
}

TEST(Quant, QatTrainsWithoutDiverging) {
  auto t = trained();
  QatConfig cfg;
  cfg.epochs = 1;
  const auto h = qat_train(t.net, t.data.train, cfg);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_TRUE(std::isfinite(h[0].loss));
}

TEST(Quant, SchemeValidation) {
  QuantScheme s;
  s.weight_bits = 1;
  EXPECT_THROW(s.validate(), std::exception);
  s.weight_bits = 17;
  EXPECT_THROW(s.validate(), std::exception);
}
