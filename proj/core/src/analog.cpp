#include "analognas/analog.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "analognas/errors.hpp"
#include "analognas/nn/linalg.hpp"
#include "analognas/nn/quant.hpp"

namespace analognas::analog {

HardwareConfig HardwareConfig::noiseless() {
  HardwareConfig hw;
  hw.output_noise_sigma = 0.0;
  hw.prog_noise_scale = 0.0;
  hw.read_noise_scale = 0.0;
  hw.drift_nu_mean = 0.0;
  hw.drift_nu_std = 0.0;
  return hw;
}

void HardwareConfig::validate() const {
  if (dac_bits < 2 || dac_bits > 16) throw RangeError("hardware.dac_bits must lie in [2, 16]");
  if (adc_bits < 2 || adc_bits > 16) throw RangeError("hardware.adc_bits must lie in [2, 16]");
  if (!(g_max > 0.0)) throw RangeError("hardware.g_max must be > 0");
  for (double v : {output_noise_sigma, prog_noise_scale, prog_a0, prog_a1, read_noise_scale, read_b0, drift_nu_std})
    if (!(v >= 0.0)) throw RangeError("hardware noise sigmas and scales must be >= 0");
  if (!(drift_nu_mean >= 0.0)) throw RangeError("hardware.drift_nu_mean must be >= 0");
  if (!(drift_t0_seconds > 0.0)) throw RangeError("hardware.drift_t0_seconds must be > 0");
  if (kDriftTimes.front() < drift_t0_seconds) throw RangeError("hardware.drift_t0_seconds exceeds the first drift time");
  if (eval_repeats < 1) throw RangeError("hardware.eval_repeats must be >= 1");
  if (!(adc_headroom > 0.0)) throw RangeError("hardware.adc_headroom must be > 0");
  if (calibration_batches < 1 || calibration_batch_size < 1) throw RangeError("hardware calibration size must be >= 1");
}

std::string_view adc_bound_name(AdcBoundMode m) { return m == AdcBoundMode::calibrated ? "calibrated" : "full_scale"; }

AdcBoundMode adc_bound_from_name(std::string_view name) {
  if (name == "calibrated") return AdcBoundMode::calibrated;
  if (name == "full_scale") return AdcBoundMode::full_scale;
  throw ParseError("unknown ADC bound mode '" + std::string(name) + "' (expected calibrated or full_scale)");
}

double apply_drift(double g, double nu, double t, double t0) {
  if (!(t0 > 0.0)) throw RangeError("drift reference time must be > 0");
  if (t < t0) throw RangeError("drift time " + std::to_string(t) + " s precedes the programming time");
  if (nu < 0.0) throw RangeError("drift exponent must be >= 0");
  if (t == t0 || nu == 0.0) return g;
  return g * std::pow(t / t0, -nu);
}

ProgrammedLayer program_layer(std::span<const float> weights, int rows, int cols, double input_bound,
                              double output_bound, const HardwareConfig& hw, Rng& rng, std::string name) {
  ProgrammedLayer L;
  L.name = std::move(name);
  L.rows = rows;
  L.cols = cols;
  L.t0 = hw.drift_t0_seconds;
  L.input_bound = input_bound > 0.0 ? input_bound : 1.0;
  L.output_bound = output_bound > 0.0 ? output_bound : static_cast<double>(cols);
  double w_max = 0.0;
  for (float w : weights) w_max = std::max(w_max, static_cast<double>(std::abs(w)));
  L.w_max = w_max > 0.0 ? w_max : 1.0;

  const std::size_t n = weights.size();
  L.g_plus.assign(n, 0.0);
  L.g_minus.assign(n, 0.0);
  L.nu_plus.assign(n, 0.0);
  L.nu_minus.assign(n, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double g_max = hw.g_max;
  // Only the device carrying the weight's sign is programmed; its partner stays
  // in the reset state at zero conductance.
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double target = g_max * std::abs(w) / L.w_max;
    double g = target;
    if (hw.prog_noise_scale > 0.0) {
      const double sigma = hw.prog_noise_scale * g_max * (hw.prog_a0 + hw.prog_a1 * target / g_max);
      g = std::clamp(target + sigma * normal(rng), 0.0, g_max);
    }
    (w > 0.0 ? L.g_plus : L.g_minus)[i] = g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double* nu : {&L.nu_plus[i], &L.nu_minus[i]}) {
      const double draw = hw.drift_nu_std > 0.0 ? hw.drift_nu_mean + hw.drift_nu_std * normal(rng) : hw.drift_nu_mean;
      *nu = std::max(draw, 0.0);
    }
  }
  L.reference_readout = probe_readout(L, L.t0, hw);
  L.compensation_disabled = !(L.reference_readout > 0.0);
  return L;
}

ProgrammedNetwork program_network(const nn::Network<float>& net, const nn::Dataset& calib, const HardwareConfig& hw,
                                  std::uint64_t seed) {
  hw.validate();
  ProgrammedNetwork p{net, {}, hw, seed};
  for (const nn::ConvUnit<float>* u : p.net.units())
    if (u->has_batch_norm())
      for (int c = 0; c < u->rows(); ++c)
        if (!std::isfinite(static_cast<double>(u->batch_norm().eval_scale(c))))
          throw UnsupportedLayerError("layer " + u->name() + " has a batch norm that cannot be folded");
  p.net.fold_batch_norm();

  const auto units = p.net.units();
  nn::RangeObserver obs(units.size());
  nn::observe_ranges(p.net, calib, hw.calibration_batches, hw.calibration_batch_size, obs);
  Rng rng(seed);
  for (std::size_t i = 0; i < units.size(); ++i) {
    const nn::ConvUnit<float>& u = *units[i];
    const auto& w = u.weight().value;
    double w_max = 0.0;
    for (float v : w) w_max = std::max(w_max, static_cast<double>(std::abs(v)));
    const double b_in = obs.abs_max(i) > 0.0f ? obs.abs_max(i) : 1.0;
    const double full_scale = static_cast<double>(u.fan_in());
    double bound = full_scale;
    if (hw.adc_bound == AdcBoundMode::calibrated && w_max > 0.0) {
      const double seen = obs.output_abs_max(i) / (b_in * w_max) * hw.adc_headroom;
      if (seen > 0.0) bound = std::min(seen, full_scale);
    }
    p.layers.push_back(program_layer(w, u.rows(), u.fan_in(), b_in, bound, hw, rng, u.name()));
  }
  return p;
}

std::vector<double> drifted_conductances(std::span<const double> g, std::span<const double> nu, double t, double t0) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = apply_drift(g[i], nu[i], t, t0);
  return out;
}

double probe_readout(const ProgrammedLayer& layer, double t, const HardwareConfig& hw) {
  double total = 0.0;
  const auto cols = static_cast<std::size_t>(layer.cols);
  for (std::size_t r = 0; r < static_cast<std::size_t>(layer.rows); ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      row += apply_drift(layer.g_plus[i], layer.nu_plus[i], t, layer.t0) -
             apply_drift(layer.g_minus[i], layer.nu_minus[i], t, layer.t0);
    }
    total += std::abs(row);
  }
  return total / hw.g_max;
}

double compensation_factor(const ProgrammedLayer& layer, const HardwareConfig& hw, double t) {
  if (!hw.global_drift_compensation || layer.compensation_disabled || t == layer.t0) return 1.0;
  const double now = probe_readout(layer, t, hw);
  if (!(now > 0.0)) return 1.0;
  return layer.reference_readout / now;
}

std::vector<double> effective_weights(const ProgrammedLayer& layer, const HardwareConfig& hw, double t,
                                      bool compensate) {
  const double alpha = compensate ? compensation_factor(layer, hw, t) : 1.0;
  std::vector<double> w(layer.devices());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double diff = apply_drift(layer.g_plus[i], layer.nu_plus[i], t, layer.t0) -
                        apply_drift(layer.g_minus[i], layer.nu_minus[i], t, layer.t0);
    w[i] = alpha * diff / hw.g_max * layer.w_max;
  }
  return w;
}

namespace {

// Read noise on the programmed devices, then the normalized weight matrix.
template <typename T, typename Engine>
void noisy_weights(const ProgrammedLayer& L, std::span<const double> gp, std::span<const double> gm,
                   const HardwareConfig& hw, Engine& rng, std::vector<T>& w) {
  const double sigma = hw.read_noise_scale * hw.read_b0 * hw.g_max;
  boost::random::normal_distribution<float> normal(0.0f, 1.0f);
  w.resize(L.devices());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double p = gp[i], m = gm[i];
    if (sigma > 0.0) {
      if (p > 0.0) p = std::clamp(p + sigma * normal(rng), 0.0, hw.g_max);
      if (m > 0.0) m = std::clamp(m + sigma * normal(rng), 0.0, hw.g_max);
    }
    w[i] = static_cast<T>((p - m) / hw.g_max);
  }
}

// Clip to [-bound, bound] and quantize to `levels` steps per side, rounding
// half away from zero; same rule as quantize_symmetric.
struct Quantizer {
  double bound, to_levels, from_levels, levels;
  Quantizer(double b, int bits)
      : bound(b), to_levels(((1 << (bits - 1)) - 1) / b), from_levels(b / ((1 << (bits - 1)) - 1)),
        levels((1 << (bits - 1)) - 1) {}
  double operator()(double v) const {
    const double q = std::clamp(v * to_levels, -levels, levels);
    return static_cast<double>(static_cast<std::int64_t>(q + (q < 0.0 ? -0.5 : 0.5))) * from_levels;
  }
};

// DAC: normalize by the input bound, clip to [-1, 1], quantize.
template <typename T>
void dac(const ProgrammedLayer& L, const HardwareConfig& hw, std::span<const T> x, std::span<T> xq,
         ConverterStats& stats) {
  const double inv = 1.0 / L.input_bound;
  const Quantizer q(1.0, hw.dac_bits);
  std::uint64_t clips = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = static_cast<double>(x[i]) * inv;
    clips += std::abs(v) > 1.0;
    xq[i] = static_cast<T>(q(v));
  }
  stats.dac_clips += clips;
}

// Crossbar product on DAC-converted inputs, output noise, ADC, compensation,
// rescale to weight units.
template <typename T, typename Engine>
void multiply_and_convert(const ProgrammedLayer& L, std::span<const T> w, double alpha, double noise_sigma,
                          const HardwareConfig& hw, std::span<const T> xq, std::size_t ncols, std::span<T> out,
                          Engine& rng, ConverterStats& stats) {
  nn::gemm(w.data(), xq.data(), out.data(), static_cast<std::size_t>(L.rows), static_cast<std::size_t>(L.cols), ncols);
  const double bound = L.output_bound, sigma = noise_sigma * bound;
  const double rescale = alpha * L.input_bound * L.w_max;
  const Quantizer q(bound, hw.adc_bits);
  std::uint64_t saturated = 0;
  if (sigma > 0.0) {
    thread_local std::vector<float> noise;
    noise.resize(out.size());
    boost::random::normal_distribution<float> normal(0.0f, 1.0f);
    for (float& n : noise) n = normal(rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
      T& o = out[i];
      const double y = static_cast<double>(o) + sigma * noise[i];
      saturated += std::abs(y) > bound;
      o = static_cast<T>(q(y) * rescale);
    }
  } else {
    for (T& o : out) {
      const double y = static_cast<double>(o);
      saturated += std::abs(y) > bound;
      o = static_cast<T>(q(y) * rescale);
    }
  }
  stats.adc_saturations += saturated;
  stats.outputs += out.size();
}

}  // namespace

std::vector<double> analog_matvec(const ProgrammedLayer& layer, std::span<const double> x, const HardwareConfig& hw,
                                  double t, Rng& rng, ConverterStats* stats) {
  if (x.size() != static_cast<std::size_t>(layer.cols))
    throw RangeError("analog_matvec input has " + std::to_string(x.size()) + " elements, layer expects " +
                     std::to_string(layer.cols));
  const auto gp = drifted_conductances(layer.g_plus, layer.nu_plus, t, layer.t0);
  const auto gm = drifted_conductances(layer.g_minus, layer.nu_minus, t, layer.t0);
  std::vector<double> w, xq(x.size()), y(static_cast<std::size_t>(layer.rows));
  ConverterStats local;
  ConverterStats& st = stats ? *stats : local;
  dac<double>(layer, hw, x, xq, st);
  noisy_weights<double>(layer, gp, gm, hw, rng, w);
  multiply_and_convert<double>(layer, w, compensation_factor(layer, hw, t), hw.output_noise_sigma, hw, xq, 1, y, rng,
                               st);
  return y;
}

AnalogExecutor::AnalogExecutor(const ProgrammedNetwork& pnet, double t) : pnet_(pnet) {
  reseed(pnet.seed);
  state_.reserve(pnet.layers.size());
  for (const auto& L : pnet.layers)
    state_.push_back({drifted_conductances(L.g_plus, L.nu_plus, t, L.t0),
                      drifted_conductances(L.g_minus, L.nu_minus, t, L.t0), compensation_factor(L, pnet.hw, t)});
}

void AnalogExecutor::reseed(std::uint64_t seed) {
  rng_.seed(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
}

void AnalogExecutor::input(const nn::ConvUnit<float>& unit, std::span<float> x) {
  dac<float>(pnet_.layers[unit.id()], pnet_.hw, x, x, stats_);
}

void AnalogExecutor::matmul(const nn::ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols,
                            std::span<float> out) {
  const auto& L = pnet_.layers[unit.id()];
  const auto& s = state_[unit.id()];
  noisy_weights<float>(L, s.g_plus, s.g_minus, pnet_.hw, rng_, w_);
  multiply_and_convert<float>(L, w_, s.alpha, pnet_.hw.output_noise_sigma, pnet_.hw, cols, ncols, out, rng_, stats_);
}

void QuantizedDigitalExecutor::input(const nn::ConvUnit<float>& unit, std::span<float> x) {
  ConverterStats stats;
  dac<float>(pnet_.layers[unit.id()], pnet_.hw, x, x, stats);
}

void QuantizedDigitalExecutor::matmul(const nn::ConvUnit<float>& unit, std::span<const float> cols,
                                      std::size_t ncols, std::span<float> out) {
  const auto& L = pnet_.layers[unit.id()];
  std::vector<float> w(unit.weight().value.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = static_cast<float>(static_cast<double>(unit.weight().value[i]) / L.w_max);
  NoiseEngine unused;
  ConverterStats stats;
  multiply_and_convert<float>(L, w, 1.0, 0.0, pnet_.hw, cols, ncols, out, unused, stats);
}

AnalogResult analog_evaluate(const ProgrammedNetwork& pnet, const nn::Dataset& test, double t, std::uint64_t seed) {
  if (test.empty()) throw EmptyInputError("cannot evaluate on an empty dataset");
  AnalogExecutor exec(pnet, t);
  AnalogResult r;
  for (int rep = 0; rep < pnet.hw.eval_repeats; ++rep) {
    exec.reseed(derive_seed(seed, {static_cast<std::uint64_t>(rep)}));
    r.repeats.push_back(nn::evaluate_accuracy(pnet.net, test, exec));
  }
  double sum = 0.0;
  for (double a : r.repeats) sum += a;
  r.mean = sum / static_cast<double>(r.repeats.size());
  double sq = 0.0;
  for (double a : r.repeats) sq += (a - r.mean) * (a - r.mean);
  r.std = std::sqrt(sq / static_cast<double>(r.repeats.size()));
  r.stats = exec.stats();
  return r;
}

std::vector<int> quantized_digital_predict(const ProgrammedNetwork& pnet, const nn::Dataset& test) {
  QuantizedDigitalExecutor exec(pnet);
  return nn::predict(pnet.net, test, exec);
}

double quantized_digital_accuracy(const ProgrammedNetwork& pnet, const nn::Dataset& test) {
  QuantizedDigitalExecutor exec(pnet);
  return nn::evaluate_accuracy(pnet.net, test, exec);
}

void HwtConfig::validate() const {
  if (!(eta >= 0.0)) throw RangeError("hwt.eta must be >= 0");
  train.validate();
}

void HwtNoiseHook::weights(const nn::ConvUnit<float>&, std::span<float> w) {
  if (eta_ == 0.0) return;
  float m = 0.0f;
  for (float v : w) m = std::max(m, std::abs(v));
  const double sigma = eta_ * m;
  if (sigma == 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  for (float& v : w) v += static_cast<float>(normal(rng_));
}

void HwtNoiseHook::output(const nn::ConvUnit<float>&, std::span<float> y) {
  if (sigma_ == 0.0) return;
  float m = 0.0f;
  for (float v : y) m = std::max(m, std::abs(v));
  const double sigma = sigma_ * m;
  if (sigma == 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  for (float& v : y) v += static_cast<float>(normal(rng_));
}

nn::TrainHistory hwt_train(nn::Network<float>& net, const nn::Dataset& train, const HardwareConfig& hw,
                           const HwtConfig& cfg, std::uint64_t seed) {
  hw.validate();
  cfg.validate();
  HwtNoiseHook hook(cfg.eta, cfg.output_noise ? hw.output_noise_sigma : 0.0, derive_seed(seed, {0x6877}));
  nn::TrainConfig tc = cfg.train;
  tc.seed = seed;
  return nn::sgd_train(net, train, tc, &hook);
}

}  // namespace analognas::analog
