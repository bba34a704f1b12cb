// Acceptance run: one PASS/FAIL line per criterion. Oracles here are written
// independently of the library code they check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "analognas/analog.hpp"
#include "analognas/analysis.hpp"
#include "analognas/bench_store.hpp"
#include "analognas/config.hpp"
#include "analognas/errors.hpp"
#include "analognas/nas_search.hpp"
#include "analognas/nn/layers.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/nn/train.hpp"
#include "analognas/search_space.hpp"

namespace fs = std::filesystem;
using namespace analognas;
using space::CellEncoding;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. search-space exactness

Outcome space_exactness() {
  std::set<std::array<space::OpKind, 6>> seen;
  std::size_t count = 0, bad_index = 0, bad_string = 0;
  for (const auto& e : space::enumerate_space()) {
    ++count;
    seen.insert(e.ops());
    const auto i = space::decode(e);
    if (space::encode(i) != e) ++bad_index;
    if (space::from_nb201_string(space::to_nb201_string(e)) != e) ++bad_string;
  }
  for (space::ArchIndex i = 0; i < space::kSpaceSize; ++i)
    if (space::decode(space::encode(i)) != i) ++bad_index;
  const bool ok = count == 15625 && seen.size() == 15625 && bad_index == 0 && bad_string == 0;
  return {ok, std::to_string(count) + " enumerated, " + std::to_string(seen.size()) + " unique, " +
                  std::to_string(bad_index) + " index and " + std::to_string(bad_string) + " string mismatches"};
}

// ---------------------------------------------------------------------------
// 2. path oracle: depth-first search over the 4-node DAG

std::vector<std::vector<int>> dfs_paths(const std::array<int, 6>& ops) {
  // Edge list in canonical order: 0->1, 0->2, 1->2, 0->3, 1->3, 2->3.
  const int from[6] = {0, 0, 1, 0, 1, 2};
  const int to[6] = {1, 2, 2, 3, 3, 3};
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  std::function<void(int)> walk = [&](int node) {
    if (node == 3) {
      out.push_back(stack);
      return;
    }
    for (int e = 0; e < 6; ++e) {
      if (from[e] != node || ops[e] == 1) continue;
      stack.push_back(ops[e]);
      walk(to[e]);
      stack.pop_back();
    }
  };
  walk(0);
  std::sort(out.begin(), out.end());
  return out;
}

Outcome path_oracle() {
  std::size_t mismatches = 0;
  for (space::ArchIndex i = 0; i < space::kSpaceSize; ++i) {
    std::array<int, 6> ops{};
    for (int e = 0, v = static_cast<int>(i); e < 6; ++e, v /= 5) ops[static_cast<std::size_t>(e)] = v % 5;
    std::vector<std::vector<int>> lib;
    for (const auto& p : space::extract_paths(space::encode(i))) {
      std::vector<int> seq;
      for (auto op : p.view()) seq.push_back(space::op_code(op));
      lib.push_back(seq);
    }
    std::sort(lib.begin(), lib.end());
    if (lib != dfs_paths(ops)) ++mismatches;
  }
  const auto conv = space::extract_paths(CellEncoding::from_codes({2, 2, 2, 2, 2, 2}));
  std::multiset<int> lengths;
  for (const auto& p : conv) lengths.insert(p.length);
  const bool conv_ok = conv.size() == 4 && lengths == std::multiset<int>{1, 2, 2, 3};
  return {mismatches == 0 && conv_ok,
          std::to_string(mismatches) + " mismatches over 15625; all-conv cell has " + std::to_string(conv.size()) +
              " paths"};
}

// ---------------------------------------------------------------------------
// 3. gradient checks (float64)

using T4 = nn::Tensor4<double>;

void fill_normal(std::span<double> v, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  for (double& x : v) x = n(rng);
}

T4 random_tensor(int n, int c, int h, int w, std::mt19937_64& rng) {
  T4 t(n, c, h, w);
  fill_normal(t.span(), rng);
  return t;
}

double dot(const T4& a, const T4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Compares analytic derivatives of `loss` at sampled coordinates with central
// differences. Returns ||a - n|| / max(||a||, ||n||), 0 when both vanish.
struct Coord {
  double* p;
  double analytic;
};

double fd_relative_error(const std::function<double()>& loss, const std::vector<Coord>& coords) {
  constexpr double h = 1e-6;
  double diff = 0.0, na = 0.0, nn_ = 0.0;
  for (const auto& c : coords) {
    const double v = *c.p;
    *c.p = v + h;
    const double lp = loss();
    *c.p = v - h;
    const double lm = loss();
    *c.p = v;
    const double numeric = (lp - lm) / (2 * h);
    diff += (numeric - c.analytic) * (numeric - c.analytic);
    na += c.analytic * c.analytic;
    nn_ += numeric * numeric;
  }
  const double scale = std::sqrt(std::max(na, nn_));
  return scale < 1e-12 ? 0.0 : std::sqrt(diff) / scale;
}

// Up to k sampled coordinates of a buffer with its gradient.
void sample_coords(std::vector<double>& value, const std::vector<double>& grad, std::size_t k, std::mt19937_64& rng,
                   std::vector<Coord>& out) {
  std::vector<std::size_t> idx(value.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t j = 0; j < std::min(k, idx.size()); ++j) out.push_back({&value[idx[j]], grad[idx[j]]});
}

void sample_coords(T4& value, const T4& grad, std::size_t k, std::mt19937_64& rng, std::vector<Coord>& out) {
  std::vector<std::size_t> idx(value.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t j = 0; j < std::min(k, idx.size()); ++j) out.push_back({value.data() + idx[j], grad.data()[idx[j]]});
}

void sample_params(std::vector<nn::Param<double>*> params, std::size_t k, std::mt19937_64& rng,
                   std::vector<Coord>& out) {
  for (auto* p : params) sample_coords(p->value, p->grad, k, rng, out);
}

// Moves elements away from the ReLU kink so central differences stay on one side.
void avoid_kink(T4& t) {
  for (double& v : t.span())
    if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
}

struct GradCase {
  std::string kind;
  std::function<double(std::mt19937_64&)> run;  // returns relative error
  int instances;
};

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> cases;
  auto conv_case = [](nn::ConvGeometry g, bool bias, bool bn) {
    return [=](std::mt19937_64& rng) {
      nn::ConvUnit<double> u(g, bias, bn, "u");
      u.init(rng);
      if (bn) {
        fill_normal(u.batch_norm().gamma.value, rng);
        fill_normal(u.batch_norm().beta.value, rng);
      }
      T4 x = random_tensor(3, g.in_channels, 6, 5, rng);
      const T4 r = random_tensor(3, g.out_channels, g.out_extent(6), g.out_extent(5), rng);
      auto loss = [&] { return dot(u.forward_train(x, nullptr), r); };
      std::vector<nn::Param<double>*> ps;
      u.collect_params(ps);
      for (auto* p : ps) p->zero_grad();
      u.forward_train(x, nullptr);
      T4 dx = u.backward(r);
      std::vector<Coord> coords;
      sample_coords(x, dx, 20, rng, coords);
      sample_params(ps, 20, rng, coords);
      return fd_relative_error(loss, coords);
    };
  };
  cases.push_back({"conv3x3+bias", conv_case({3, 4, 3, 1, 1}, true, false), 10});
  cases.push_back({"conv3x3 stride 2", conv_case({2, 3, 3, 2, 1}, false, false), 10});
  cases.push_back({"conv1x1+batchnorm", conv_case({3, 4, 1, 1, 0}, false, true), 10});

  cases.push_back({"batchnorm", [](std::mt19937_64& rng) {
                     nn::BatchNorm<double> bn(3, "bn");
                     fill_normal(bn.gamma.value, rng);
                     fill_normal(bn.beta.value, rng);
                     T4 x = random_tensor(4, 3, 3, 3, rng);
                     const T4 r = random_tensor(4, 3, 3, 3, rng);
                     auto loss = [&] { return dot(bn.forward_train(x), r); };
                     bn.gamma.zero_grad();
                     bn.beta.zero_grad();
                     bn.forward_train(x);
                     T4 dx = bn.backward(r);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 30, rng, coords);
                     sample_params({&bn.gamma, &bn.beta}, 3, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   10});
  cases.push_back({"relu", [](std::mt19937_64& rng) {
                     T4 x = random_tensor(2, 3, 4, 4, rng);
                     avoid_kink(x);
                     const T4 r = random_tensor(2, 3, 4, 4, rng);
                     auto loss = [&] { return dot(nn::relu_forward(x), r); };
                     T4 dx = nn::relu_backward(x, r);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 40, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"avgpool3x3", [](std::mt19937_64& rng) {
                     T4 x = random_tensor(2, 2, 5, 4, rng);
                     const T4 r = random_tensor(2, 2, 5, 4, rng);
                     auto loss = [&] { return dot(nn::avg_pool3x3_forward(x), r); };
                     T4 dx = nn::avg_pool3x3_backward(r);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 40, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"avgpool2x2", [](std::mt19937_64& rng) {
                     T4 x = random_tensor(2, 2, 5, 6, rng);
                     const T4 r = random_tensor(2, 2, 2, 3, rng);
                     auto loss = [&] { return dot(nn::avg_pool2x2_forward(x), r); };
                     T4 dx = nn::avg_pool2x2_backward(r, 5, 6);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 40, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"global avgpool", [](std::mt19937_64& rng) {
                     T4 x = random_tensor(3, 4, 3, 3, rng);
                     const T4 r = random_tensor(3, 4, 1, 1, rng);
                     auto loss = [&] { return dot(nn::global_avg_pool_forward(x), r); };
                     T4 dx = nn::global_avg_pool_backward(r, 3, 3);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 40, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"softmax cross-entropy", [](std::mt19937_64& rng) {
                     T4 z = random_tensor(5, 6, 1, 1, rng);
                     std::vector<int> labels(5);
                     for (int& l : labels) l = static_cast<int>(rng() % 6);
                     auto loss = [&] { return nn::softmax_cross_entropy<double>(z, labels, nullptr).loss; };
                     T4 dz(5, 6, 1, 1);
                     nn::softmax_cross_entropy<double>(z, labels, &dz);
                     std::vector<Coord> coords;
                     sample_coords(z, dz, 30, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"cell", [](std::mt19937_64& rng) {
                     std::array<int, 6> codes{};
                     for (int& c : codes) c = static_cast<int>(rng() % 5);
                     nn::Cell<double> cell(CellEncoding::from_codes(std::span<const int>(codes)), 3, "cell");
                     std::vector<nn::Param<double>*> ps;
                     for (auto& e : cell.edges())
                       if (e.conv()) {
                         e.conv()->init(rng);
                         e.conv()->collect_params(ps);
                       }
                     T4 x = random_tensor(2, 3, 4, 4, rng);
                     avoid_kink(x);
                     const T4 r = random_tensor(2, 3, 4, 4, rng);
                     auto loss = [&] { return dot(cell.forward_train(x, nullptr), r); };
                     for (auto* p : ps) p->zero_grad();
                     cell.forward_train(x, nullptr);
                     T4 dx = cell.backward(r);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 20, rng, coords);
                     sample_params(ps, 6, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   8});
  cases.push_back({"reduction block", [](std::mt19937_64& rng) {
                     nn::ReductionBlock<double> rb(2, "rb");
                     std::vector<nn::Param<double>*> ps;
                     for (auto* u : {&rb.conv_a(), &rb.conv_b(), &rb.shortcut()}) {
                       u->init(rng);
                       u->collect_params(ps);
                     }
                     T4 x = random_tensor(2, 2, 6, 6, rng);
                     avoid_kink(x);
                     const T4 r = random_tensor(2, 4, 3, 3, rng);
                     auto loss = [&] { return dot(rb.forward_train(x, nullptr), r); };
                     for (auto* p : ps) p->zero_grad();
                     rb.forward_train(x, nullptr);
                     T4 dx = rb.backward(r);
                     std::vector<Coord> coords;
                     sample_coords(x, dx, 20, rng, coords);
                     sample_params(ps, 6, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   6});
  cases.push_back({"network", [](std::mt19937_64& rng) {
                     std::array<int, 6> codes{};
                     for (int& c : codes) c = static_cast<int>(rng() % 5);
                     nn::MacroConfig macro{4, 1, 5, 8, 3};
                     nn::Network<double> net(CellEncoding::from_codes(std::span<const int>(codes)), macro, rng());
                     T4 x = random_tensor(3, 3, 8, 8, rng);
                     std::vector<int> labels{0, 3, 4};
                     auto loss = [&] {
                       return nn::softmax_cross_entropy<double>(net.forward_train(x), labels, nullptr).loss;
                     };
                     net.zero_grad();
                     T4 dz(3, 5, 1, 1);
                     nn::softmax_cross_entropy<double>(net.forward_train(x), labels, &dz);
                     net.backward(dz);
                     std::vector<Coord> coords;
                     sample_params(net.params(), 2, rng, coords);
                     return fd_relative_error(loss, coords);
                   },
                   6});
  return cases;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(2024);
  int total = 0, failed = 0;
  double worst = 0.0;
  std::string worst_kind, failures;
  for (const auto& c : grad_cases()) {
    for (int i = 0; i < c.instances; ++i) {
      const double err = c.run(rng);
      ++total;
      if (!(err <= 1e-4)) {
        ++failed;
        failures += " " + c.kind;
      }
      if (!(err <= worst)) {
        worst = err;
        worst_kind = c.kind;
      }
    }
  }
  return {failed == 0 && total == 100, std::to_string(total) + " instances, " + std::to_string(failed) +
                                           " failed, worst relative error " + num(worst, 3) + " (" + worst_kind + ")" +
                                           failures};
}

// ---------------------------------------------------------------------------
// 4. noiseless-limit equivalence

nn::DatasetPair small_data(std::uint64_t seed) {
  nn::SynthSpec s;
  s.train_size = 500;
  s.test_size = 300;
  s.margin = 0.3;
  return nn::synth_dataset(s, seed);
}

Outcome noiseless_limit() {
  std::mt19937_64 rng(7);
  analog::HardwareConfig hw16 = analog::HardwareConfig::noiseless();
  hw16.dac_bits = hw16.adc_bits = 16;
  double worst = 0.0;  // error / (full range * 2^-15)
  for (int layer = 0; layer < 50; ++layer) {
    const int rows = 1 + static_cast<int>(rng() % 16), cols = 1 + static_cast<int>(rng() % 64);
    std::vector<float> w(static_cast<std::size_t>(rows * cols));
    std::normal_distribution<double> n(0.0, 0.5);
    for (float& v : w) v = static_cast<float>(n(rng));
    const double bound = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
    std::vector<double> x(static_cast<std::size_t>(cols));
    for (double& v : x) v = std::uniform_real_distribution<double>(-bound, bound)(rng);
    Rng prog(rng());
    const auto L = analog::program_layer(w, rows, cols, bound, cols, hw16, prog);
    const auto y = analog::analog_matvec(L, x, hw16, hw16.drift_t0_seconds, prog);
    const double full_range = L.output_bound * L.input_bound * L.w_max;
    for (int r = 0; r < rows; ++r) {
      double d = 0.0;
      for (int c = 0; c < cols; ++c) d += static_cast<double>(w[static_cast<std::size_t>(r * cols + c)]) * x[static_cast<std::size_t>(c)];
      worst = std::max(worst, std::abs(y[static_cast<std::size_t>(r)] - d) / (full_range * std::ldexp(1.0, -15)));
    }
  }

  // 8-bit converters, zero noise: decisions against the quantized digital path.
  const auto data = small_data(11);
  const analog::HardwareConfig hw8 = analog::HardwareConfig::noiseless();
  std::size_t agree = 0, total = 0;
  for (auto codes : {std::array<int, 6>{2, 0, 3, 2, 2, 2}, std::array<int, 6>{3, 4, 2, 0, 3, 2},
                     std::array<int, 6>{0, 2, 4, 3, 0, 2}}) {
    nn::Network<float> net(CellEncoding::from_codes(std::span<const int>(codes)), nn::MacroConfig::desk(), 5);
    nn::TrainConfig tc = nn::TrainConfig::desk();
    tc.epochs = 3;
    nn::sgd_train(net, data.train, tc);
    const auto pnet = analog::program_network(net, data.train, hw8, 3);
    analog::AnalogExecutor exec(pnet, hw8.drift_t0_seconds);
    const auto a = nn::predict(pnet.net, data.test, exec);
    const auto q = analog::quantized_digital_predict(pnet, data.test);
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == q[i];
    total += a.size();
  }
  const double match = static_cast<double>(agree) / static_cast<double>(total);
  return {worst <= 1.0 && match >= 0.99, "16-bit max error " + num(worst, 3) + " x full-range*2^-15 over 50 layers; " +
                                            "8-bit decision match " + num(100 * match) + "% of " + std::to_string(total)};
}

// ---------------------------------------------------------------------------
// 5. drift law and compensation

Outcome drift_and_compensation() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst_law = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double g = 25.0 * u01(rng) + 1e-3, nu = 0.2 * u01(rng), t0 = 1.0 + 99.0 * u01(rng);
    const double t = t0 * std::exp(u01(rng) * std::log(1e6));
    const double expect = g * std::exp(-nu * std::log(t / t0));
    worst_law = std::max(worst_law, std::abs(analog::apply_drift(g, nu, t, t0) - expect) / expect);
  }

  analog::HardwareConfig hw = analog::HardwareConfig::noiseless();
  hw.drift_nu_mean = 0.06;
  hw.drift_nu_std = 0.0;
  double worst_comp = 0.0, worst_alpha = 0.0;
  for (int layer = 0; layer < 20; ++layer) {
    const int rows = 8, cols = 24;
    std::vector<float> w(rows * cols);
    std::normal_distribution<double> n(0.0, 1.0);
    for (float& v : w) v = static_cast<float>(n(rng));
    Rng prog(rng());
    const auto L = analog::program_layer(w, rows, cols, 1.0, cols, hw, prog);
    const auto ref = analog::effective_weights(L, hw, L.t0, false);
    std::vector<double> x(cols);
    for (double& v : x) v = n(rng);
    for (double t : analog::kDriftTimes) {
      const auto comp = analog::effective_weights(L, hw, t, true);
      for (int r = 0; r < rows; ++r) {
        double y0 = 0.0, y1 = 0.0, scale = 0.0;
        for (int c = 0; c < cols; ++c) {
          y0 += ref[r * cols + c] * x[c];
          y1 += comp[r * cols + c] * x[c];
          scale += std::abs(ref[r * cols + c] * x[c]);
        }
        worst_comp = std::max(worst_comp, std::abs(y1 - y0) / scale);
      }
      const double alpha = analog::compensation_factor(L, hw, t);
      worst_alpha = std::max(worst_alpha, std::abs(alpha - std::pow(t / L.t0, 0.06)) / alpha);
    }
  }
  return {worst_law <= 1e-12 && worst_comp <= 1e-10 && worst_alpha <= 1e-10,
          "drift law max rel error " + num(worst_law, 3) + " on 1e4 draws; compensated output rel error " +
              num(worst_comp, 3) + "; alpha vs (t/t0)^nu " + num(worst_alpha, 3)};
}

// ---------------------------------------------------------------------------
// 6. Kendall tau-b against pair counting

double tau_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long long conc = 0, disc = 0, tx = 0, ty = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++tx;
      if (dy == 0) ++ty;
      if (dx != 0 && dy != 0) (dx * dy > 0 ? conc : disc)++;
    }
  const long long n0 = static_cast<long long>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(conc - disc) / denom;
}

Outcome kendall_oracle() {
  std::mt19937_64 rng(99);
  int mismatches = 0, undefined = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 2 + rng() % 63;
    const int levels = inst % 3 == 0 ? 0 : 1 + static_cast<int>(rng() % 6);  // 0: continuous
    std::vector<double> x(n), y(n);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = levels ? static_cast<double>(rng() % levels) : g(rng);
      y[i] = levels ? static_cast<double>(rng() % levels) : g(rng) + 0.5 * x[i];
    }
    const double a = analysis::kendall_tau_b(x, y), b = tau_oracle(x, y);
    if (std::isnan(b)) {
      ++undefined;
      if (!std::isnan(a)) ++mismatches;
      continue;
    }
    const double d = std::abs(a - b);
    worst = std::max(worst, d);
    if (!(d <= 1e-12)) ++mismatches;
  }
  return {mismatches == 0, "1000 instances (" + std::to_string(undefined) + " all-tied), " +
                               std::to_string(mismatches) + " mismatches, max |diff| " + num(worst, 3)};
}

// ---------------------------------------------------------------------------
// Micro-benchmark table, cached by config digest.

bench::BenchmarkTable micro_benchmark() {
  const RunConfig cfg = RunConfig::desk();
  const std::string digest = config_digest(cfg);
  const fs::path dir(ANALOGNAS_ACCEPTANCE_CACHE);
  const fs::path cached = dir / ("desk-" + digest + ".jsonl");
  if (fs::exists(cached)) {
    auto t = bench::load(cached);
    if (t.size() == resolve_scope(cfg.scope).size()) return t;
  }
  std::cerr << "building the desk micro-benchmark into " << cached.string() << " (tens of minutes)" << std::endl;
  const auto data = load_dataset(cfg);
  bench::BenchmarkTable table(bench::TableMetadata::from_config(cfg));
  const auto archs = resolve_scope(cfg.scope);
  for (std::size_t i = 0; i < archs.size(); ++i) {
    table.put(bench::run_full_pipeline(archs[i], data, cfg));
    std::cerr << "  [" << i + 1 << "/" << archs.size() << "] " << archs[i].to_tuple_string() << std::endl;
  }
  fs::create_directories(dir);
  bench::save(table, cached);
  return table;
}

// ---------------------------------------------------------------------------
// 7. directional reproduction on the micro-benchmark

Outcome micro_benchmark_directions(const bench::BenchmarkTable& table) {
  const auto recs = table.records();
  const double n = static_cast<double>(recs.size());
  std::size_t degraded = 0, improved = 0;
  double noisy = 0.0, analog_ = 0.0;
  std::array<double, 4> nd{}, ad{};
  std::vector<double> base, ptq, nsy;
  for (const auto* r : recs) {
    degraded += r->noisy_acc.mean <= r->baseline_acc;
    improved += r->analog_acc.mean > r->noisy_acc.mean;
    noisy += r->noisy_acc.mean / n;
    analog_ += r->analog_acc.mean / n;
    for (std::size_t h = 0; h < 4; ++h) {
      nd[h] += r->noisy_drift[h].mean / n;
      ad[h] += r->analog_drift[h].mean / n;
    }
    base.push_back(r->baseline_acc);
    ptq.push_back(r->ptq_acc);
    nsy.push_back(r->noisy_acc.mean);
  }
  auto monotone = [](const std::array<double, 4>& m) {
    int inversions = 0;
    bool small = true;
    for (std::size_t h = 0; h + 1 < 4; ++h)
      if (m[h + 1] > m[h]) {
        ++inversions;
        small = small && m[h + 1] - m[h] <= 0.5;
      }
    return inversions == 0 || (inversions == 1 && small);
  };
  const double a_frac = degraded / n, b_frac = improved / n;
  const double tau_ptq = analysis::kendall_tau_b(base, ptq), tau_noisy = analysis::kendall_tau_b(base, nsy);
  const bool a = a_frac >= 0.9, b = analog_ > noisy && b_frac >= 0.7, c = monotone(nd) && monotone(ad),
             d = tau_ptq > tau_noisy;
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << recs.size() << " archs; (a) noisy<=baseline " << 100 * a_frac
    << "%; (b) mean analog " << analog_ << " vs noisy " << noisy << ", HWT improves " << 100 * b_frac
    << "%; (c) noisy drift " << nd[0] << "/" << nd[1] << "/" << nd[2] << "/" << nd[3] << ", analog drift " << ad[0]
    << "/" << ad[1] << "/" << ad[2] << "/" << ad[3] << "; (d) tau(base,ptq) " << std::setprecision(3) << tau_ptq
    << " vs tau(base,noisy) " << tau_noisy;
  if (!a) s << " [a failed]";
  if (!b) s << " [b failed]";
  if (!c) s << " [c failed]";
  if (!d) s << " [d failed]";
  return {recs.size() == 125 && a && b && c && d, s.str()};
}

// ---------------------------------------------------------------------------
// 8. analysis rules on hand-labeled fixtures

bench::BenchmarkRecord fixture(space::ArchIndex index, double baseline, double noisy, double analog_,
                               std::array<double, 4> noisy_drift, std::array<double, 4> analog_drift) {
  bench::BenchmarkRecord r;
  r.index = index;
  r.arch = space::encode(index);
  r.baseline_acc = baseline;
  r.ptq_acc = baseline;
  r.qat_acc = baseline;
  r.noisy_acc = {noisy, 0.0};
  r.analog_acc = {analog_, 0.0};
  for (std::size_t h = 0; h < 4; ++h) {
    r.noisy_drift[h] = {noisy_drift[h], 0.0};
    r.analog_drift[h] = {analog_drift[h], 0.0};
  }
  r.config_digest = "fixture";
  return r;
}

bench::BenchmarkTable fixture_table(std::initializer_list<bench::BenchmarkRecord> recs) {
  bench::TableMetadata m;
  m.config_digest = "fixture";
  bench::BenchmarkTable t(m);
  for (const auto& r : recs) t.put(r);
  return t;
}

Outcome analysis_rules() {
  using analysis::Robustness;
  constexpr auto R = Robustness::robust, N = Robustness::non_robust, X = Robustness::excluded;
  std::vector<std::string> errors;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) errors.push_back(what);
  };

  // Noise robustness: drops 4, 8, 12, 16 in the filtered set; q25 = 4 + 0.75*4 = 7.
  const std::array<double, 4> flat{50, 50, 50, 50};
  const auto noise_table = fixture_table({fixture(10, 95, 91, 92, flat, flat), fixture(11, 94, 86, 90, flat, flat),
                                          fixture(12, 93, 81, 88, flat, flat), fixture(13, 92, 76, 85, flat, flat),
                                          fixture(14, 90, 89, 89, flat, flat), fixture(15, 85, 80, 81, flat, flat)});
  {
    const auto res = analysis::classify_noise_robustness(noise_table);
    const std::vector<Robustness> want{R, N, N, N, X, X};
    std::vector<Robustness> got;
    for (const auto& l : res.labels) got.push_back(l.tag);
    expect(got == want, "noise labels (quantile rule)");
    expect(res.threshold == 7.0, "noise threshold " + num(res.threshold));
    analysis::NoiseRobustnessOptions fixed;
    fixed.fixed_threshold = 12.0;
    got.clear();
    for (const auto& l : analysis::classify_noise_robustness(noise_table, fixed).labels) got.push_back(l.tag);
    expect(got == std::vector<Robustness>{R, R, R, N, X, X}, "noise labels (fixed threshold 12, inclusive)");
  }

  // Drift robustness with the default thresholds.
  const auto drift_table = fixture_table({
      fixture(20, 90, 85, 88, {86, 81, 74, 60}, {86, 85, 83.5, 81}),  // noisy drops 4,9,16,30; analog 2,3,4.5,7
      fixture(21, 90, 72, 80, {84, 79, 75, 66}, {77, 76.5, 75, 72}),  // noisy 6,11,15,24; analog 3,3.5,5,8
      fixture(22, 80, 75, 78, flat, flat),                            // baseline not > 80
      fixture(23, 95, 70, 90, flat, flat),                            // noisy not > 70
  });
  {
    const auto noisy = analysis::classify_drift_robustness(drift_table, analysis::Branch::noisy);
    const auto analog_ = analysis::classify_drift_robustness(drift_table, analysis::Branch::analog);
    using Tags = std::array<Robustness, 4>;
    const std::vector<Tags> want_noisy{{R, R, R, N}, {N, N, R, R}, {X, X, X, X}, {X, X, X, X}};
    const std::vector<Tags> want_analog{{R, R, R, R}, {N, R, N, N}, {X, X, X, X}, {X, X, X, X}};
    std::vector<Tags> got_noisy, got_analog;
    for (const auto& l : noisy.labels) got_noisy.push_back(l.tag);
    for (const auto& l : analog_.labels) got_analog.push_back(l.tag);
    expect(got_noisy == want_noisy, "noisy drift labels");
    expect(got_analog == want_analog, "analog drift labels");
    expect(noisy.filtered == 2 && analog_.filtered == 2, "drift pre-filter count");
  }

  // HWT categories.
  const auto hwt_table = fixture_table({
      fixture(30, 90, 75, 85, flat, flat),  // naturally robust, high-performing
      fixture(31, 90, 10, 60, flat, flat),  // non-robust, +500%
      fixture(32, 90, 50, 85, flat, flat),  // moderate, +70%, high-performing
      fixture(33, 90, 20, 30, flat, flat),  // moderate (20 is not < 20), +50%
      fixture(34, 90, 70, 80, flat, flat),  // moderate (70 is not > 70), not high-performing
      fixture(35, 90, 0, 30, flat, flat),   // non-robust, improvement undefined
  });
  {
    using analysis::HwtGroup;
    const auto h = analysis::hwt_categories(hwt_table);
    const std::vector<HwtGroup> want{HwtGroup::naturally_robust, HwtGroup::non_robust, HwtGroup::moderate,
                                     HwtGroup::moderate,         HwtGroup::moderate,   HwtGroup::non_robust};
    const std::vector<bool> want_hp{true, false, true, false, false, false};
    const std::vector<double> want_imp{100.0 * 10 / 75, 500, 70, 50, 100.0 * 10 / 70};
    std::vector<HwtGroup> got;
    std::vector<bool> got_hp;
    for (const auto& r : h.records) {
      got.push_back(r.group);
      got_hp.push_back(r.high_performing);
    }
    expect(got == want, "hwt groups");
    expect(got_hp == want_hp, "hwt high-performing flags");
    for (std::size_t i = 0; i < want_imp.size(); ++i)
      expect(std::abs(h.records[i].improvement - want_imp[i]) < 1e-9, "hwt improvement " + std::to_string(i));
    expect(analysis::is_undefined(h.records[5].improvement) && h.undefined_improvements == 1, "undefined improvement");
    const double mean = (100.0 * 10 / 75 + 500 + 70 + 50 + 100.0 * 10 / 70) / 5;
    expect(std::abs(h.mean_improvement - mean) < 1e-9, "hwt mean improvement");
  }

  std::string detail = "noise, drift (both branches) and HWT fixtures";
  for (const auto& e : errors) detail += "; mismatch: " + e;
  return {errors.empty(), detail};
}

// ---------------------------------------------------------------------------
// 9. search suite on the frozen table

Outcome search_suite(const bench::BenchmarkTable& table) {
  const auto domain = search::SearchDomain::parse("(2,0,3,*,*,*)");
  const search::ObjectiveSpec spec;
  std::vector<std::pair<double, space::ArchIndex>> values;
  for (const auto& e : domain.members())
    values.push_back({bench::field_value(table.query(e), spec.metric), space::decode(e)});
  // Oracle argmax, ties to the lowest index.
  auto best = values.front();
  for (const auto& v : values)
    if (v.first > best.first) best = v;
  std::vector<double> sorted;
  for (const auto& v : values) sorted.push_back(v.first);
  std::sort(sorted.rbegin(), sorted.rend());
  const std::size_t top_n = values.size() / 20;  // 5%, rounded down
  const double top_cut = sorted[top_n - 1];

  const auto ex = search::run_method("exhaustive", table, domain, 0, 0, spec);
  const bool exact = space::decode(ex.best) == best.second && ex.best_value == best.first;

  std::map<std::string, int> hits;
  bool budgets_ok = true, replay_ok = true;
  const std::size_t budget = 40;
  for (const std::string m : {"random", "evolution", "bayesian", "bananas", "analognas", "ga_imc"}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r1 = search::run_method(m, table, domain, budget, seed, spec);
      const auto r2 = search::run_method(m, table, domain, budget, seed, spec);
      budgets_ok = budgets_ok && r1.queries_used <= budget && r1.trajectory.size() <= budget;
      replay_ok = replay_ok && search::to_json(r1) == search::to_json(r2);
      hits[m] += r1.best_value >= top_cut;
    }
  }
  const bool ok = exact && budgets_ok && replay_ok && hits["evolution"] >= 7 && hits["bayesian"] >= 7;
  std::ostringstream s;
  s << "exhaustive " << (exact ? "matches" : "differs from") << " oracle argmax " << best.second << " ("
    << num(best.first) << "); top-5% (" << top_n << " archs) hit in 40 queries:";
  for (const auto& [m, h] : hits) s << ' ' << m << ' ' << h << "/10";
  s << "; budgets " << (budgets_ok ? "respected" : "EXCEEDED") << "; replay " << (replay_ok ? "identical" : "DIFFERS");
  return {ok, s.str()};
}

// ---------------------------------------------------------------------------
// 10. GBT surrogate

Outcome gbt_surrogate() {
  bool monotone = true;
  double worst_tau = 1.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double score[6][5];
    for (auto& e : score)
      for (double& s : e) s = g(rng);
    auto objective = [&](const CellEncoding& enc) {
      double v = 0.0;
      for (int e = 0; e < 6; ++e) v += score[e][space::op_code(enc.op(e))];
      return v;
    };
    std::vector<space::ArchIndex> idx(space::kSpaceSize);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<CellEncoding> train, test;
    std::vector<double> y, truth;
    for (std::size_t i = 0; i < 900; ++i) {
      train.push_back(space::encode(idx[i]));
      y.push_back(objective(train.back()));
    }
    for (std::size_t i = 900; i < 2900; ++i) {
      test.push_back(space::encode(idx[i]));
      truth.push_back(objective(test.back()));
    }
    const auto model = search::fit_gbt(train, y);
    for (std::size_t i = 1; i < model.train_rmse.size(); ++i)
      monotone = monotone && model.train_rmse[i] <= model.train_rmse[i - 1];
    std::vector<double> pred;
    for (const auto& e : test) pred.push_back(model.predict(e));
    worst_tau = std::min(worst_tau, analysis::kendall_tau_b(pred, truth));
  }
  return {monotone && worst_tau >= 0.8, "training RMSE " + std::string(monotone ? "non-increasing" : "INCREASES") +
                                            " every round; held-out tau (900 train, 2000 test) min over 3 objectives " +
                                            num(worst_tau, 3)};
}

// ---------------------------------------------------------------------------
// 11. persistence and CLI

bench::BenchmarkRecord random_record(space::ArchIndex index, const std::string& digest, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> acc(0.0, 100.0), sd(0.0, 3.0);
  bench::BenchmarkRecord r;
  r.index = index;
  r.arch = space::encode(index);
  r.baseline_acc = acc(rng);
  r.ptq_acc = acc(rng);
  r.qat_acc = acc(rng);
  r.noisy_acc = {acc(rng), sd(rng)};
  r.analog_acc = {acc(rng), sd(rng)};
  for (std::size_t h = 0; h < 4; ++h) {
    r.noisy_drift[h] = {acc(rng), sd(rng)};
    r.analog_drift[h] = {acc(rng), sd(rng)};
  }
  r.param_count = rng() % 1000000;
  r.seed = rng();
  r.config_digest = digest;
  r.provenance = {"fixture"};
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome persistence_and_cli(const bench::BenchmarkTable& micro) {
  std::vector<std::string> errors;
  std::mt19937_64 rng(31);
  bench::TableMetadata meta;
  meta.config_digest = "00000000deadbeef";
  meta.config_json = "{}";

  bench::BenchmarkTable t(meta);
  std::set<space::ArchIndex> used;
  while (t.size() < 60) {
    const auto i = static_cast<space::ArchIndex>(rng() % space::kSpaceSize);
    if (used.insert(i).second) t.put(random_record(i, meta.config_digest, rng));
  }
  std::stringstream s1, s2;
  bench::save(t, s1);
  const auto back = bench::load(s1);
  bench::save(back, s2);
  if (!(back == t)) errors.push_back("round-trip not equal");
  if (s1.str() != s2.str()) errors.push_back("re-save not byte-identical");

  // Merge associativity and commutativity on overlapping partitions.
  bench::BenchmarkTable a(meta), b(meta), c(meta);
  std::size_t k = 0;
  for (const auto& [i, r] : t.map()) {
    if (k % 3 != 2) a.put(r);
    if (k % 3 != 0) b.put(r);
    if (k % 2 == 0) c.put(r);
    ++k;
  }
  const auto left = bench::merge({bench::merge({a, b}), c});
  const auto right = bench::merge({a, bench::merge({b, c})});
  const auto flat = bench::merge({c, a, b});
  if (!(left == right && right == flat && flat == t)) errors.push_back("merge not associative/commutative");

  const std::string cli = ANALOGNAS_CLI_PATH;
  if (cli.empty()) {
    errors.push_back("CLI not built");
  } else {
    const fs::path dir = fs::temp_directory_path() / ("analognas_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    RunConfig cfg = RunConfig::desk();
    cfg.dataset.synthetic.train_size = 200;
    cfg.dataset.synthetic.test_size = 100;
    cfg.pipeline.train.epochs = 1;
    cfg.pipeline.qat.epochs = 1;
    cfg.pipeline.hwt.train.epochs = 1;
    cfg.pipeline.hw.eval_repeats = 2;
    save_run_config(cfg, dir / "tiny.json");
    const std::string base = "\"" + cli + "\" build-bench --quiet --config \"" + (dir / "tiny.json").string() +
                             "\" --archs 1357,15624 --seed 3 -o ";
    const int rc1 = std::system((base + "\"" + (dir / "a.jsonl").string() + "\" 2>/dev/null").c_str());
    const int rc2 =
        std::system((base + "\"" + (dir / "b.jsonl").string() + "\" --workers 2 2>/dev/null").c_str());
    if (rc1 != 0 || rc2 != 0) {
      errors.push_back("build-bench failed");
    } else {
      const auto fa = slurp(dir / "a.jsonl");
      if (fa.empty() || fa != slurp(dir / "b.jsonl")) errors.push_back("build-bench output differs between runs");
      if (bench::load(dir / "a.jsonl").size() != 2) errors.push_back("build-bench record count");
    }

    bench::save(micro, dir / "micro.jsonl");
    const int rc3 = std::system(("\"" + cli + "\" analyze -b \"" + (dir / "micro.jsonl").string() +
                                 "\" --kendall baseline,noisy,analog,ptq,qat -o \"" + (dir / "k.csv").string() + "\"")
                                    .c_str());
    std::size_t rows = 0;
    bool shape = rc3 == 0;
    std::istringstream csv(slurp(dir / "k.csv"));
    std::string line;
    while (std::getline(csv, line)) {
      if (line.empty() || line[0] == '#') continue;
      ++rows;
      shape = shape && std::count(line.begin(), line.end(), ',') == 5;
    }
    if (!(shape && rows == 6)) errors.push_back("analyze --kendall is not a 5x5 matrix with header");
    fs::remove_all(dir);
  }
  std::string detail = "60-record round-trip, merge fixture, build-bench twice (1 and 2 workers), analyze --kendall";
  for (const auto& e : errors) detail += "; " + e;
  return {errors.empty(), detail};
}

}  // namespace

// Optional arguments select criteria by number; none runs all of them.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto selected = [&](int id) { return only.empty() || only.count(id) > 0; };
  int failed = 0, ran = 0;
  auto run = [&](int id, const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
    if (!selected(id)) return;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
      o.pass = false;
      o.detail += "; runtime over " + num(limit_s) + " s";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << id << "] " << name << ": " << o.detail << " ("
              << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::endl;
  };

  run(1, "search-space exactness", 5, space_exactness);
  run(2, "path oracle", 10, path_oracle);
  run(3, "gradient checks", 120, gradient_checks);
  run(4, "noiseless-limit equivalence", 120, noiseless_limit);
  run(5, "drift law and compensation", 30, drift_and_compensation);
  run(6, "Kendall tau oracle", 30, kendall_oracle);

  std::optional<bench::BenchmarkTable> micro;
  if (selected(7) || selected(9) || selected(11)) try {
    micro = micro_benchmark();
  } catch (const std::exception& e) {
    std::cerr << "micro-benchmark unavailable: " << e.what() << std::endl;
  }
  auto need_micro = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!micro) return {false, "micro-benchmark table unavailable"};
      return fn(*micro);
    };
  };
  run(7, "micro-benchmark directions", 0, need_micro(micro_benchmark_directions));
  run(8, "analysis rules", 10, analysis_rules);
  run(9, "search suite", 300, need_micro(search_suite));
  run(10, "GBT surrogate", 120, gbt_surrogate);
  run(11, "persistence and CLI", 60, need_micro(persistence_and_cli));

  std::cout << (failed ? std::to_string(failed) + " of " + std::to_string(ran) + " criteria failed"
                      : "all " + std::to_string(ran) + " criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
