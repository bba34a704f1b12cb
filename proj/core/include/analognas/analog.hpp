#pragma once

// Crossbar inference simulator: differential conductance mapping, programming
// and read noise, output noise, DAC/ADC quantization, power-law drift with
// global drift compensation, plus hardware-aware training.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/random/taus88.hpp>

#include "analognas/nn/dataset.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/nn/train.hpp"
#include "analognas/rng.hpp"

namespace analognas::analog {

// How the ADC clip bound is chosen. full_scale is the largest possible
// normalized output (fan-in); calibrated is the largest output observed on a
// calibration pass, times adc_headroom.
enum class AdcBoundMode { calibrated, full_scale };

struct HardwareConfig {
  int dac_bits = 8;
  int adc_bits = 8;
  double output_noise_sigma = 0.04;  // relative to the ADC bound
  double g_max = 25.0;               // microsiemens
  double prog_noise_scale = 1.0;
  double prog_a0 = 0.01;
  double prog_a1 = 0.03;
  double read_noise_scale = 1.0;
  double read_b0 = 0.01;
  double drift_nu_mean = 0.06;
  double drift_nu_std = 0.02;
  double drift_t0_seconds = 20.0;
  bool global_drift_compensation = true;
  int eval_repeats = 25;
  AdcBoundMode adc_bound = AdcBoundMode::calibrated;
  double adc_headroom = 1.0;
  int calibration_batches = 4;
  int calibration_batch_size = 64;

  // Every noise source and drift off; converters unchanged.
  static HardwareConfig noiseless();
  void validate() const;
  friend bool operator==(const HardwareConfig&, const HardwareConfig&) = default;
};

std::string_view adc_bound_name(AdcBoundMode m);
AdcBoundMode adc_bound_from_name(std::string_view name);

inline constexpr std::array<double, 4> kDriftTimes{60.0, 3600.0, 86400.0, 2592000.0};
inline constexpr std::array<std::string_view, 4> kDriftLabels{"60s", "1h", "1d", "30d"};

// G * (t / t0)^(-nu). Throws RangeError for t < t0, t0 <= 0 or nu < 0.
double apply_drift(double g, double nu, double t, double t0);

// Symmetric uniform quantizer over [-bound, bound] with 2^(bits-1) - 1 levels
// per side. Returns the clipped, quantized value.
inline double quantize_symmetric(double v, double bound, int bits) {
  const double levels = static_cast<double>((1 << (bits - 1)) - 1);
  const double q = std::clamp(v, -bound, bound) * (levels / bound);
  // Round half away from zero; |q| <= levels so the integer cast is exact.
  return static_cast<double>(static_cast<std::int64_t>(q + (q < 0.0 ? -0.5 : 0.5))) * (bound / levels);
}

struct ProgrammedLayer {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> g_plus, g_minus;    // rows x cols, in [0, g_max]
  std::vector<double> nu_plus, nu_minus;  // drift exponents
  double t0 = 20.0;
  double w_max = 1.0;         // weight units per normalized unit
  double input_bound = 1.0;   // DAC clip bound (activation units)
  double output_bound = 1.0;  // ADC bound in normalized units
  double reference_readout = 0.0;
  bool compensation_disabled = false;

  std::size_t devices() const { return g_plus.size(); }
};

struct ProgrammedNetwork {
  nn::Network<float> net;  // batch norm folded; biases stay digital
  std::vector<ProgrammedLayer> layers;
  HardwareConfig hw;
  std::uint64_t seed = 0;
};

// Maps a single folded weight matrix (rows x cols) onto a crossbar.
ProgrammedLayer program_layer(std::span<const float> weights, int rows, int cols, double input_bound,
                              double output_bound, const HardwareConfig& hw, Rng& rng, std::string name = {});

// Folds batch norm, calibrates converter bounds on `calib` and programs every
// conv/affine layer. Throws UnsupportedLayerError for a layer that cannot be
// folded.
ProgrammedNetwork program_network(const nn::Network<float>& net, const nn::Dataset& calib, const HardwareConfig& hw,
                                  std::uint64_t seed);

// Conductances of one polarity after drifting to time t (no read noise).
std::vector<double> drifted_conductances(std::span<const double> g, std::span<const double> nu, double t, double t0);

// Probe readout sum_r |sum_c (G+ - G-)| / g_max of the noiseless drifted
// array under an all-ones input.
double probe_readout(const ProgrammedLayer& layer, double t, const HardwareConfig& hw);

// reference / readout(t); 1 at t0 and 1 whenever compensation is off or the
// layer's readout is zero.
double compensation_factor(const ProgrammedLayer& layer, const HardwareConfig& hw, double t);

// Noiseless drifted weights in weight units, optionally compensated.
std::vector<double> effective_weights(const ProgrammedLayer& layer, const HardwareConfig& hw, double t,
                                      bool compensate);

// Per-access read and output noise is the hot loop of analog evaluation; it
// runs on a small combined Tausworthe generator rather than the 64-bit
// Mersenne twister used for everything else.
using NoiseEngine = boost::random::taus88;

struct ConverterStats {
  std::uint64_t dac_clips = 0;
  std::uint64_t adc_saturations = 0;
  std::uint64_t outputs = 0;
};

// One access of the array with a single input vector.
std::vector<double> analog_matvec(const ProgrammedLayer& layer, std::span<const double> x, const HardwareConfig& hw,
                                  double t, Rng& rng, ConverterStats* stats = nullptr);

// Inference executor for a programmed network at a fixed time t. Drifted
// conductances and compensation factors are computed once; every matmul call
// draws fresh read and output noise from the executor's stream.
class AnalogExecutor final : public nn::UnitExecutor<float> {
 public:
  AnalogExecutor(const ProgrammedNetwork& pnet, double t);
  void reseed(std::uint64_t seed);
  void input(const nn::ConvUnit<float>& unit, std::span<float> x) override;
  bool transforms_input() const override { return true; }
  void matmul(const nn::ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols,
              std::span<float> out) override;
  const ConverterStats& stats() const { return stats_; }
  double compensation(std::size_t layer) const { return state_[layer].alpha; }

  struct LayerState {
    std::vector<double> g_plus, g_minus;
    double alpha = 1.0;
  };

 private:
  const ProgrammedNetwork& pnet_;
  std::vector<LayerState> state_;
  NoiseEngine rng_;
  ConverterStats stats_;
  std::vector<float> w_;
};

// Same converters and bounds as the analog path, exact programmed weights and
// no noise or drift.
class QuantizedDigitalExecutor final : public nn::UnitExecutor<float> {
 public:
  explicit QuantizedDigitalExecutor(const ProgrammedNetwork& pnet) : pnet_(pnet) {}
  void input(const nn::ConvUnit<float>& unit, std::span<float> x) override;
  bool transforms_input() const override { return true; }
  void matmul(const nn::ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols,
              std::span<float> out) override;

 private:
  const ProgrammedNetwork& pnet_;
};

struct AnalogResult {
  double mean = 0.0;  // accuracy in [0, 1]
  double std = 0.0;   // population standard deviation over repeats
  std::vector<double> repeats;
  ConverterStats stats;
};

// hw.eval_repeats evaluations of the test set at time t; repeat r draws its
// read/output noise from derive_seed(seed, {r}).
AnalogResult analog_evaluate(const ProgrammedNetwork& pnet, const nn::Dataset& test, double t, std::uint64_t seed);
double quantized_digital_accuracy(const ProgrammedNetwork& pnet, const nn::Dataset& test);
std::vector<int> quantized_digital_predict(const ProgrammedNetwork& pnet, const nn::Dataset& test);

struct HwtConfig {
  double eta = 0.1;                // weight noise std relative to max|w| per layer
  bool output_noise = true;        // add hw.output_noise_sigma * max|y| per layer
  bool from_pretrained = true;     // fine-tune the digitally trained network
  nn::TrainConfig train;

  void validate() const;
  friend bool operator==(const HwtConfig&, const HwtConfig&) = default;
};

class HwtNoiseHook final : public nn::TrainHook<float> {
 public:
  HwtNoiseHook(double eta, double output_sigma, std::uint64_t seed) : eta_(eta), sigma_(output_sigma), rng_(seed) {}
  void weights(const nn::ConvUnit<float>& unit, std::span<float> w) override;
  void output(const nn::ConvUnit<float>& unit, std::span<float> y) override;

 private:
  double eta_, sigma_;
  Rng rng_;
};

// Noisy-forward training with noise held constant in the backward pass. With
// eta = 0 and no output noise this is sgd_train with the same seed.
nn::TrainHistory hwt_train(nn::Network<float>& net, const nn::Dataset& train, const HardwareConfig& hw,
                           const HwtConfig& cfg, std::uint64_t seed);

}  // namespace analognas::analog
