#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "analognas/analog.hpp"
#include "analognas/errors.hpp"

using namespace analognas;
using namespace analognas::analog;

namespace {

std::vector<float> random_weights(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<float> w(n);
  for (float& v : w) v = static_cast<float>(g(rng));
  return w;
}

double mean_abs_error(const std::vector<float>& w, const ProgrammedLayer& L, const HardwareConfig& hw) {
  const auto eff = effective_weights(L, hw, L.t0, false);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += std::abs(eff[i] - w[i]);
  return s / static_cast<double>(w.size());
}

}  // namespace

TEST(Drift, ClosedForm) {
  EXPECT_NEAR(apply_drift(10.0, 0.06, 2000.0, 20.0), 10.0 * std::pow(100.0, -0.06), 1e-12);
  EXPECT_NEAR(apply_drift(10.0, 0.06, 2000.0, 20.0), 7.5857757502918375, 1e-12);
  EXPECT_EQ(apply_drift(3.0, 0.06, 20.0, 20.0), 3.0);
  EXPECT_EQ(apply_drift(3.0, 0.0, 1e9, 20.0), 3.0);
  EXPECT_THROW(apply_drift(3.0, 0.06, 10.0, 20.0), RangeError);
  EXPECT_THROW(apply_drift(3.0, -0.1, 30.0, 20.0), RangeError);
}

TEST(Programming, NoiselessIsProportional) {
  const auto hw = HardwareConfig::noiseless();
  auto w = random_weights(200, 1);
  w[5] = 0.0f;
  Rng rng(2);
  const auto L = program_layer(w, 10, 20, 1.0, 20.0, hw, rng);
  EXPECT_EQ(L.g_plus[5], 0.0);
  EXPECT_EQ(L.g_minus[5], 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(L.g_plus[i] * L.g_minus[i], 0.0);
    EXPECT_LE(L.g_plus[i], hw.g_max);
  }
  EXPECT_LT(mean_abs_error(w, L, hw), 1e-6);
}

TEST(Programming, ConductancesStayInRange) {
  HardwareConfig hw;
  hw.prog_noise_scale = 5.0;
  const auto w = random_weights(2000, 3);
  Rng rng(4);
  const auto L = program_layer(w, 40, 50, 1.0, 50.0, hw, rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_GE(L.g_plus[i], 0.0);
    EXPECT_LE(L.g_plus[i], hw.g_max);
    EXPECT_GE(L.g_minus[i], 0.0);
    EXPECT_LE(L.g_minus[i], hw.g_max);
    EXPECT_GE(L.nu_plus[i], 0.0);
  }
}

TEST(Programming, ErrorGrowsWithNoiseScale) {
  const auto w = random_weights(10000, 5);
  double prev = -1.0;
  for (double scale : {0.0, 0.5, 1.0, 2.0}) {
    HardwareConfig hw = HardwareConfig::noiseless();
    hw.prog_noise_scale = scale;
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
      Rng rng(seed);
      err += mean_abs_error(w, program_layer(w, 100, 100, 1.0, 100.0, hw, rng), hw);
    }
    EXPECT_GT(err, prev);
    prev = err;
  }
}

TEST(Matvec, ZeroInputWithoutOutputNoiseIsZero) {
  HardwareConfig hw;
  hw.output_noise_sigma = 0.0;
  const auto w = random_weights(60, 6);
  Rng rng(7);
  const auto L = program_layer(w, 6, 10, 1.0, 10.0, hw, rng);
  const std::vector<double> x(10, 0.0);
  for (double y : analog_matvec(L, x, hw, 3600.0, rng)) EXPECT_EQ(y, 0.0);
}

TEST(Matvec, OutputVarianceScalesWithSigmaSquared) {
  HardwareConfig hw = HardwareConfig::noiseless();
  hw.dac_bits = hw.adc_bits = 16;
  const auto w = random_weights(8 * 16, 8);
  Rng rng(9);
  const auto L = program_layer(w, 8, 16, 1.0, 16.0, hw, rng);
  std::vector<double> x(16);
  std::iota(x.begin(), x.end(), -8.0);
  for (double& v : x) v /= 10.0;
  std::vector<double> s2, var;
  for (double sigma : {0.01, 0.02, 0.03, 0.04, 0.05}) {
    hw.output_noise_sigma = sigma;
    double sum = 0.0, sq = 0.0;
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) {
      const double y = analog_matvec(L, x, hw, L.t0, rng)[0];
      sum += y;
      sq += y * y;
    }
    const double m = sum / reps;
    s2.push_back(sigma * sigma);
    var.push_back(sq / reps - m * m);
  }
  // Least-squares fit var = a + b s2 and its R^2.
  const double n = static_cast<double>(s2.size());
  const double mx = std::accumulate(s2.begin(), s2.end(), 0.0) / n, my = std::accumulate(var.begin(), var.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < s2.size(); ++i) {
    sxy += (s2[i] - mx) * (var[i] - my);
    sxx += (s2[i] - mx) * (s2[i] - mx);
    syy += (var[i] - my) * (var[i] - my);
  }
  EXPECT_GE(sxy * sxy / (sxx * syy), 0.99);
}

TEST(Compensation, UnityAtT0AndGrowsWithTime) {
  HardwareConfig hw = HardwareConfig::noiseless();
  hw.drift_nu_mean = 0.06;
  hw.drift_nu_std = 0.02;
  const auto w = random_weights(400, 10);
  Rng rng(11);
  const auto L = program_layer(w, 20, 20, 1.0, 20.0, hw, rng);
  EXPECT_EQ(compensation_factor(L, hw, L.t0), 1.0);
  double prev = 1.0;
  for (double t : kDriftTimes) {
    const double a = compensation_factor(L, hw, t);
    EXPECT_GE(a, prev);
    prev = a;
  }
  hw.global_drift_compensation = false;
  EXPECT_EQ(compensation_factor(L, hw, 86400.0), 1.0);
}

TEST(Compensation, ZeroLayerDisablesCompensation) {
  HardwareConfig hw;
  const std::vector<float> w(12, 0.0f);
  Rng rng(1);
  const auto L = program_layer(w, 3, 4, 1.0, 4.0, hw, rng);
  EXPECT_TRUE(L.compensation_disabled);
  EXPECT_EQ(compensation_factor(L, hw, 86400.0), 1.0);
}

TEST(Config, ValidationRejectsBadValues) {
  HardwareConfig hw;
  hw.adc_bits = 1;
  EXPECT_THROW(hw.validate(), RangeError);
  hw = {};
  hw.g_max = 0.0;
  EXPECT_THROW(hw.validate(), RangeError);
  hw = {};
  hw.eval_repeats = 0;
  EXPECT_THROW(hw.validate(), RangeError);
  EXPECT_NO_THROW(HardwareConfig{}.validate());
}

namespace {

struct Fixture {
  nn::DatasetPair data;
  nn::Network<float> net;
};

Fixture trained_network() {
  nn::SynthSpec s;
  s.train_size = 300;
  s.test_size = 100;
  Fixture f{nn::synth_dataset(s, 3), nn::Network<float>(space::encode(9877), nn::MacroConfig::desk(), 2)};
  nn::TrainConfig tc = nn::TrainConfig::desk();
  tc.epochs = 2;
  nn::sgd_train(f.net, f.data.train, tc);
  return f;
}

}  // namespace

TEST(Evaluate, NoiselessEqualsQuantizedDigital) {
  auto f = trained_network();
  HardwareConfig hw = HardwareConfig::noiseless();
  hw.eval_repeats = 3;
  const auto p = program_network(f.net, f.data.train, hw, 1);
  const auto r = analog_evaluate(p, f.data.test, hw.drift_t0_seconds, 5);
  EXPECT_NEAR(r.mean, quantized_digital_accuracy(p, f.data.test), 0.011);
  EXPECT_EQ(r.std, 0.0);
}

TEST(Evaluate, SameSeedSameResult) {
  auto f = trained_network();
  HardwareConfig hw;
  hw.eval_repeats = 3;
  const auto p = program_network(f.net, f.data.train, hw, 1);
  const auto a = analog_evaluate(p, f.data.test, 3600.0, 5), b = analog_evaluate(p, f.data.test, 3600.0, 5);
  EXPECT_EQ(a.repeats, b.repeats);
  EXPECT_THROW(analog_evaluate(p, nn::Dataset{}, 60.0, 1), EmptyInputError);
}

TEST(Evaluate, ProgrammingMirrorsNetwork) {
  auto f = trained_network();
  const auto p = program_network(f.net, f.data.train, HardwareConfig{}, 1);
  const auto units = p.net.units();
  ASSERT_EQ(p.layers.size(), units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    EXPECT_EQ(p.layers[i].rows, units[i]->rows());
    EXPECT_EQ(p.layers[i].cols, units[i]->fan_in());
  }
  EXPECT_TRUE(p.net.folded());
}

TEST(Hwt, ZeroNoiseMatchesSgd) {
  nn::SynthSpec s;
  s.train_size = 200;
  s.test_size = 50;
  const auto data = nn::synth_dataset(s, 4);
  nn::Network<float> a(space::encode(555), nn::MacroConfig::desk(), 3), b = a;
  HwtConfig cfg;
  cfg.eta = 0.0;
  cfg.output_noise = false;
  cfg.train = nn::TrainConfig::desk();
  cfg.train.epochs = 1;
  hwt_train(a, data.train, HardwareConfig{}, cfg, 17);
  nn::TrainConfig tc = cfg.train;
  tc.seed = 17;
  nn::sgd_train(b, data.train, tc);
  const auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}
