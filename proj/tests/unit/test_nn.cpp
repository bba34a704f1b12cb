#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "analognas/errors.hpp"
#include "analognas/nn/dataset.hpp"
#include "analognas/nn/layers.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/nn/train.hpp"

using namespace analognas;
using namespace analognas::nn;
using space::CellEncoding;

namespace {

Tensor4<float> random_input(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor4<float> t(n, c, h, w);
  Rng rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (float& v : t.span()) v = g(rng);
  return t;
}

DatasetPair tiny_data(double margin = 0.5, int classes = 10) {
  SynthSpec s;
  s.num_classes = classes;
  s.train_size = 200;
  s.test_size = 100;
  s.margin = margin;
  return synth_dataset(s, 1);
}

}  // namespace

TEST(Tensor, ChannelMajorLayout) {
  Tensor4<float> t(2, 3, 4, 5);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.offset(1, 2, 3, 4), ((2u * 2 + 1) * 4 + 3) * 5 + 4);
  EXPECT_EQ(t.channel(1).size(), 40u);
}

TEST(Layers, Im2colCol2imAdjoint) {
  // <im2col(x), c> == <x, col2im(c)> for every geometry.
  for (ConvGeometry g : {ConvGeometry{2, 3, 3, 1, 1}, ConvGeometry{2, 3, 3, 2, 1}, ConvGeometry{3, 2, 1, 1, 0}}) {
    const auto x = random_input(2, g.in_channels, 5, 6, 3).cast<double>();
    std::vector<double> cols;
    im2col(x, g, cols);
    Rng rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> c(cols.size());
    for (double& v : c) v = n(rng);
    Tensor4<double> back(2, g.in_channels, 5, 6);
    col2im<double>(c, g, back);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data()[i] * back.data()[i];
    EXPECT_NEAR(lhs, rhs, 1e-9);
  }
}

TEST(Layers, AvgPool3x3ExcludesPadding) {
  Tensor4<float> x(1, 1, 3, 3, 1.0f);
  const auto y = avg_pool3x3_forward(x);
  for (float v : y.span()) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(Layers, ArgmaxTiesToLowestClass) {
  Tensor4<float> z(1, 3, 1, 1, 2.0f);
  EXPECT_EQ(argmax_classes(z), std::vector<int>{0});
}

TEST(Network, ZeroizeCellOutputsZero) {
  Cell<float> cell(CellEncoding::from_codes({1, 1, 1, 1, 1, 1}), 4, "c");
  DigitalExecutor<float> exec;
  const auto y = cell.forward_infer(random_input(2, 4, 5, 5, 1), exec);
  for (float v : y.span()) EXPECT_EQ(v, 0.0f);
}

TEST(Network, SkipCellIsFourTimesInput) {
  Cell<float> cell(CellEncoding::from_codes({0, 0, 0, 0, 0, 0}), 4, "c");
  DigitalExecutor<float> exec;
  const auto x = random_input(2, 4, 5, 5, 2);
  const auto y = cell.forward_infer(x, exec);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(y.data()[i], 4.0f * x.data()[i]);
}

TEST(Network, ParameterCountMatchesClosedFormAndTensors) {
  for (auto macro : {MacroConfig::desk(), MacroConfig::nb201()}) {
    for (space::ArchIndex i : {0u, 1u, 3906u, 7812u, 15624u}) {
      const auto enc = space::encode(i);
      Network<float> net(enc, macro, 0);
      std::size_t brute = 0;
      for (auto* p : net.params()) brute += p->size();
      EXPECT_EQ(net.parameter_count(), brute);
      EXPECT_EQ(net.parameter_count(), closed_form_parameter_count(enc, macro));
    }
  }
  // Full macro on an all-conv cell is in the 10^5..10^6 range.
  const auto n = closed_form_parameter_count(CellEncoding::from_codes({2, 2, 2, 2, 2, 2}), MacroConfig::nb201());
  EXPECT_GT(n, 100000u);
  EXPECT_LT(n, 2000000u);
}

TEST(Network, DeterministicPerSeed) {
  const auto enc = space::encode(4321);
  Network<float> a(enc, MacroConfig::desk(), 9), b(enc, MacroConfig::desk(), 9);
  const auto x = random_input(3, 3, 16, 16, 5);
  EXPECT_EQ(a.forward_infer(x), b.forward_infer(x));
}

TEST(Network, BatchNormInferenceIndependentOfBatch) {
  Network<float> net(space::encode(4321), MacroConfig::desk(), 1);
  const auto data = tiny_data();
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 1;
  sgd_train(net, data.train, tc);
  const auto x = random_input(4, 3, 16, 16, 6);
  Tensor4<float> one(1, 3, 16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int z = 0; z < 16; ++z) one.at(0, c, y, z) = x.at(2, c, y, z);
  const auto full = net.forward_infer(x), single = net.forward_infer(one);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(full.at(2, k, 0, 0), single.at(0, k, 0, 0), 1e-5);
}

TEST(Network, FoldingPreservesInference) {
  Network<float> net(space::encode(9000), MacroConfig::desk(), 2);
  const auto data = tiny_data();
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 1;
  sgd_train(net, data.train, tc);
  const auto x = random_input(2, 3, 16, 16, 8);
  const auto before = net.forward_infer(x);
  net.fold_batch_norm();
  const auto after = net.forward_infer(x);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before.data()[i], after.data()[i], 1e-4);
}

TEST(Training, CosineEndpoints) {
  EXPECT_EQ(cosine_lr(0.1, 0, 10), 0.1);
  EXPECT_EQ(cosine_lr(0.1, 10, 10), 0.0);
  EXPECT_NEAR(cosine_lr(0.1, 5, 10), 0.05, 1e-15);
}

TEST(Training, NegligibleRateLeavesParameters) {
  Network<float> net(space::encode(2500), MacroConfig::desk(), 3);
  std::vector<std::vector<float>> before;
  for (auto* p : net.params()) before.push_back(p->value);
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 1;
  tc.base_lr = 1e-30;
  tc.weight_decay = 0.0;
  const auto data = tiny_data();
  sgd_train(net, data.train, tc);
  const auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < before[i].size(); ++k) ASSERT_NEAR(params[i]->value[k], before[i][k], 1e-20) << params[i]->name;
}

TEST(Training, DeterministicHistory) {
  const auto data = tiny_data();
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 2;
  Network<float> a(space::encode(100), MacroConfig::desk(), 4), b(space::encode(100), MacroConfig::desk(), 4);
  const auto ha = sgd_train(a, data.train, tc), hb = sgd_train(b, data.train, tc);
  ASSERT_EQ(ha.size(), 2u);
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_EQ(ha[i].loss, hb[i].loss);
}

TEST(Training, SeparableTwoClassIsLearned) {
  SynthSpec s;
  s.num_classes = 2;
  s.train_size = 200;
  s.test_size = 50;
  s.margin = 1.0;
  const auto data = synth_dataset(s, 3);
  MacroConfig macro = MacroConfig::desk();
  macro.num_classes = 2;
  Network<float> net(space::CellEncoding::from_codes({2, 0, 3, 2, 2, 2}), macro, 1);
  TrainConfig tc = TrainConfig::desk();
  tc.epochs = 10;
  const auto hist = sgd_train(net, data.train, tc);
  EXPECT_GE(hist.back().accuracy, 0.99);
}

TEST(Training, ZeroizeNetworkIsClassBlind) {
  const auto data = tiny_data(0.5);
  double mean = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Network<float> net(CellEncoding::from_codes({1, 1, 1, 1, 1, 1}), MacroConfig::desk(), seed);
    mean += evaluate_accuracy(net, data.test) / 3;
  }
  EXPECT_NEAR(mean, 0.1, 0.05);
}

TEST(Training, AccuracyOf) {
  const std::vector<int> p{0, 1, 2}, l{0, 1, 2}, w{1, 2, 0};
  EXPECT_EQ(accuracy_of(p, l), 1.0);
  EXPECT_EQ(accuracy_of(p, w), 0.0);
}

TEST(Dataset, SynthDeterministicAndDisjointStreams) {
  SynthSpec s;
  s.train_size = 50;
  s.test_size = 20;
  const auto a = synth_dataset(s, 5), b = synth_dataset(s, 5);
  EXPECT_EQ(a.train.images, b.train.images);
  EXPECT_EQ(a.test.labels, b.test.labels);
  EXPECT_NE(a.train.images, synth_dataset(s, 6).train.images);
  for (int l : a.train.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 10);
  }
}

TEST(Dataset, CifarBinaryFormat) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "analognas_cifar_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    for (int r = 0; r < 3; ++r) {
      out.put(static_cast<char>(r + 1));
      for (int i = 0; i < 3072; ++i) out.put(static_cast<char>(i % 256));
    }
  }
  const auto d = load_cifar10_binary(path, Split::train);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.labels, (std::vector<int>{1, 2, 3}));
  EXPECT_FLOAT_EQ(d.images[255], 1.0f);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.put(0);
  }
  try {
    load_cifar10_binary(path, Split::train);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.byte_offset(), 3u * 3073);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_cifar10_binary(dir / "does_not_exist.bin", Split::test), FileNotFoundError);
}
