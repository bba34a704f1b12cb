#include "analognas/nn/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "analognas/errors.hpp"

namespace analognas::nn {

void QuantScheme::validate() const {
  if (weight_bits < 2 || weight_bits > 16) throw RangeError("quant.weight_bits must lie in [2, 16]");
  if (activation_bits < 2 || activation_bits > 16) throw RangeError("quant.activation_bits must lie in [2, 16]");
  if (calibration_batches < 1 || calibration_batch_size < 1) throw RangeError("quant calibration size must be >= 1");
}

float symmetric_scale(std::span<const float> w, int bits) {
  float m = 0.0f;
  for (float v : w) m = std::max(m, std::abs(v));
  if (m == 0.0f) return 1.0f;
  const auto qmax = static_cast<float>(symmetric_qmax(bits));
  const float base = m / qmax;
  const auto stable = [qmax](float s) { return (qmax * s) / qmax == s; };
  if (stable(base)) return base;
  float up = base, down = base;
  for (int i = 0; i < 64; ++i) {
    up = std::nextafter(up, std::numeric_limits<float>::infinity());
    if (stable(up)) return up;
    down = std::nextafter(down, 0.0f);
    if (stable(down)) return down;
  }
  return base;
}

void fake_quantize_symmetric(std::span<float> w, float scale, int bits) {
  const auto qmax = static_cast<float>(symmetric_qmax(bits));
  for (float& v : w) v = std::clamp(std::nearbyint(v / scale), -qmax, qmax) * scale;
}

AffineQuant AffineQuant::from_range(float lo, float hi, int bits) {
  AffineQuant q;
  q.qmin = 0;
  q.qmax = (1 << bits) - 1;
  lo = std::min(lo, 0.0f);
  hi = std::max(hi, 0.0f);
  if (hi - lo <= 0.0f) {
    q.scale = 1.0f;
    q.zero_point = 0;
    return q;
  }
  q.scale = (hi - lo) / static_cast<float>(q.qmax - q.qmin);
  q.zero_point = std::clamp(static_cast<int>(std::nearbyint(q.qmin - lo / q.scale)), q.qmin, q.qmax);
  return q;
}

float AffineQuant::apply(float x) const {
  const float q = std::clamp(std::nearbyint(x / scale) + static_cast<float>(zero_point), static_cast<float>(qmin),
                             static_cast<float>(qmax));
  return (q - static_cast<float>(zero_point)) * scale;
}

void QuantizedExecutor::input(const ConvUnit<float>& unit, std::span<float> x) {
  const auto& aq = q_.activation[unit.id()];
  for (float& v : x) v = aq.apply(v);
}

void QuantizedExecutor::matmul(const ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols,
                               std::span<float> out) {
  DigitalExecutor<float> digital;
  digital.matmul(unit, cols, ncols, out);
}

RangeObserver::RangeObserver(std::size_t units)
    : min_(units, std::numeric_limits<float>::infinity()),
      max_(units, -std::numeric_limits<float>::infinity()),
      out_abs_max_(units, 0.0f) {}

void RangeObserver::matmul(const ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols,
                           std::span<float> out) {
  const auto id = unit.id();
  for (float v : cols) {
    min_[id] = std::min(min_[id], v);
    max_[id] = std::max(max_[id], v);
  }
  DigitalExecutor<float> digital;
  digital.matmul(unit, cols, ncols, out);
  for (float v : out) out_abs_max_[id] = std::max(out_abs_max_[id], std::abs(v));
}

float RangeObserver::abs_max(std::size_t unit) const {
  if (!(max_[unit] >= min_[unit])) return 0.0f;
  return std::max(std::abs(min_[unit]), std::abs(max_[unit]));
}

void observe_ranges(const Network<float>& net, const Dataset& calib, int batches, int batch_size, RangeObserver& obs) {
  if (calib.empty()) throw EmptyInputError("calibration set is empty");
  std::vector<std::size_t> idx;
  for (int b = 0; b < batches; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * static_cast<std::size_t>(batch_size);
    if (start >= calib.size()) break;
    const std::size_t end = std::min(calib.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    net.forward_infer(make_batch<float>(calib, idx), obs);
  }
}

QuantizedNetwork ptq_int8(const Network<float>& net, const Dataset& calib, const QuantScheme& scheme) {
  scheme.validate();
  QuantizedNetwork q{net, {}, {}, scheme};
  q.net.fold_batch_norm();
  for (ConvUnit<float>* u : q.net.units()) {
    const float s = symmetric_scale(u->weight().value, scheme.weight_bits);
    fake_quantize_symmetric(u->weight().value, s, scheme.weight_bits);
    q.weight_scale.push_back(s);
  }
  RangeObserver obs(q.weight_scale.size());
  observe_ranges(q.net, calib, scheme.calibration_batches, scheme.calibration_batch_size, obs);
  for (std::size_t u = 0; u < q.weight_scale.size(); ++u) {
    const bool seen = obs.max(u) >= obs.min(u);
    q.activation.push_back(AffineQuant::from_range(seen ? obs.min(u) : 0.0f, seen ? obs.max(u) : 0.0f,
                                                   scheme.activation_bits));
  }
  return q;
}

double evaluate_accuracy(const QuantizedNetwork& q, const Dataset& test) {
  QuantizedExecutor exec(q);
  return evaluate_accuracy(q.net, test, exec);
}

void QatConfig::validate() const {
  if (epochs < 0) throw RangeError("qat.epochs must be >= 0");
  if (!(lr > 0.0)) throw RangeError("qat.lr must be > 0");
  if (weight_decay < 0.0) throw RangeError("qat.weight_decay must be >= 0");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw RangeError("qat.plateau_factor must lie in (0, 1]");
  if (!(range_momentum > 0.0 && range_momentum <= 1.0)) throw RangeError("qat.range_momentum must lie in (0, 1]");
  if (batch_size < 2) throw RangeError("qat.batch_size must be >= 2");
  scheme.validate();
}

FakeQuantHook::FakeQuantHook(std::size_t units, const QuantScheme& scheme, double range_momentum)
    : scheme_(scheme), momentum_(range_momentum), lo_(units, 0.0f), hi_(units, 0.0f), seen_(units, false), quant_(units) {}

void FakeQuantHook::weights(const ConvUnit<float>&, std::span<float> w) {
  fake_quantize_symmetric(w, symmetric_scale(w, scheme_.weight_bits), scheme_.weight_bits);
}

void FakeQuantHook::input(const ConvUnit<float>& unit, std::span<float> x, std::span<std::uint8_t> pass) {
  const auto id = unit.id();
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (!seen_[id]) {
    lo_[id] = *mn;
    hi_[id] = *mx;
    seen_[id] = true;
  } else {
    const auto m = static_cast<float>(momentum_);
    lo_[id] = (1.0f - m) * lo_[id] + m * *mn;
    hi_[id] = (1.0f - m) * hi_[id] + m * *mx;
  }
  quant_[id] = AffineQuant::from_range(lo_[id], hi_[id], scheme_.activation_bits);
  const auto& q = quant_[id];
  for (std::size_t i = 0; i < x.size(); ++i) {
    pass[i] = q.in_range(x[i]) ? 1 : 0;
    x[i] = q.apply(x[i]);
  }
}

TrainHistory qat_train(Network<float>& net, const Dataset& train, const QatConfig& cfg) {
  cfg.validate();
  if (cfg.epochs == 0) return {};
  FakeQuantHook hook(net.units().size(), cfg.scheme, cfg.range_momentum);
  AdamOptimizer opt(cfg.weight_decay);
  PlateauScheduler plateau(cfg.lr, cfg.plateau_factor, cfg.plateau_patience);
  const LoopConfig loop{cfg.epochs, cfg.batch_size, cfg.augmentation, cfg.seed};
  const auto schedule = [&plateau](int epoch, double previous_loss) {
    return epoch == 0 ? plateau.lr() : plateau.observe(previous_loss);
  };
  return run_training_loop(net, train, loop, opt, schedule, &hook);
}

}  // namespace analognas::nn
