#include <benchmark/benchmark.h>

#include <random>

#include "analognas/analog.hpp"
#include "analognas/analysis.hpp"
#include "analognas/nas_search.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/search_space.hpp"

using namespace analognas;

static void BM_KendallTau(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::round(g(rng) * 10);
    y[i] = x[i] + g(rng) * 5;
  }
  for (auto _ : state) benchmark::DoNotOptimize(analysis::kendall_tau_b(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KendallTau)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oNLogN);

static void BM_ExtractPathsFullSpace(benchmark::State& state) {
  for (auto _ : state) {
    std::size_t total = 0;
    for (const auto& e : space::enumerate_space()) total += space::extract_paths(e).size();
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(space::kSpaceSize));
}
BENCHMARK(BM_ExtractPathsFullSpace)->Unit(benchmark::kMillisecond);

static void BM_AnalogMatvec(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = static_cast<int>(state.range(1));
  Rng rng(2);
  std::normal_distribution<float> g;
  std::vector<float> w(static_cast<std::size_t>(rows * cols));
  for (float& v : w) v = g(rng);
  const analog::HardwareConfig hw;
  const auto layer = analog::program_layer(w, rows, cols, 1.0, cols, hw, rng);
  std::vector<double> x(static_cast<std::size_t>(cols), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(analog::analog_matvec(layer, x, hw, 86400.0, rng));
  state.SetItemsProcessed(state.iterations() * rows * cols);
}
BENCHMARK(BM_AnalogMatvec)->Args({16, 144})->Args({64, 576});

static void BM_ForwardInference(benchmark::State& state) {
  nn::Network<float> net(space::CellEncoding::from_codes({2, 0, 3, 2, 2, 2}), nn::MacroConfig::desk(), 0);
  const int batch = static_cast<int>(state.range(0));
  nn::Tensor4<float> x(batch, 3, 16, 16, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_infer(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardInference)->Arg(1)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_FitGbt(benchmark::State& state) {
  std::vector<space::CellEncoding> archs;
  std::vector<double> y;
  for (space::ArchIndex i = 0; i < 200; ++i) {
    archs.push_back(space::encode(i * 77 % space::kSpaceSize));
    y.push_back(static_cast<double>(archs.back().count(space::OpKind::conv3x3)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(search::fit_gbt(archs, y));
}
BENCHMARK(BM_FitGbt)->Unit(benchmark::kMillisecond);
