#pragma once

#include <span>
#include <vector>

#include "analognas/nn/dataset.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/nn/train.hpp"

namespace analognas::nn {

struct QuantScheme {
  int weight_bits = 8;
  int activation_bits = 8;
  int calibration_batches = 4;
  int calibration_batch_size = 64;

  void validate() const;
  friend bool operator==(const QuantScheme&, const QuantScheme&) = default;
};

inline int symmetric_qmax(int bits) { return (1 << (bits - 1)) - 1; }

// Per-tensor symmetric scale max|w| / qmax (1 for an all-zero tensor). The
// scale is nudged by at most a few ulps to a value s with
// fl(fl(qmax*s)/qmax) == s, which makes re-quantization an exact no-op.
float symmetric_scale(std::span<const float> w, int bits);
void fake_quantize_symmetric(std::span<float> w, float scale, int bits);

// Per-tensor affine (asymmetric) quantizer with an integer zero point; the
// representable range always contains 0.
struct AffineQuant {
  float scale = 1.0f;
  int zero_point = 0;
  int qmin = 0;
  int qmax = 255;

  static AffineQuant from_range(float lo, float hi, int bits);
  float lower() const { return static_cast<float>(qmin - zero_point) * scale; }
  float upper() const { return static_cast<float>(qmax - zero_point) * scale; }
  float apply(float x) const;
  bool in_range(float x) const { return x >= lower() && x <= upper(); }
  friend bool operator==(const AffineQuant&, const AffineQuant&) = default;
};

// Batch norm folded, weights on the symmetric grid (stored dequantized), one
// activation quantizer per weight unit input.
struct QuantizedNetwork {
  Network<float> net;
  std::vector<float> weight_scale;
  std::vector<AffineQuant> activation;
  QuantScheme scheme;
};

// Fake-quantized inference: unit inputs go through their affine quantizer,
// weights are already on the grid.
class QuantizedExecutor final : public UnitExecutor<float> {
 public:
  explicit QuantizedExecutor(const QuantizedNetwork& q) : q_(q) {}
  void input(const ConvUnit<float>& unit, std::span<float> x) override;
  bool transforms_input() const override { return true; }
  void matmul(const ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols, std::span<float> out) override;

 private:
  const QuantizedNetwork& q_;
};

// Post-training quantization without parameter updates: fold batch norm,
// quantize every conv/affine weight tensor, then calibrate each unit's input
// range by min/max over the calibration batches.
QuantizedNetwork ptq_int8(const Network<float>& net, const Dataset& calib, const QuantScheme& scheme = {});
double evaluate_accuracy(const QuantizedNetwork& q, const Dataset& test);

// Records per-unit input min/max and |input| max over a forward pass.
class RangeObserver final : public UnitExecutor<float> {
 public:
  explicit RangeObserver(std::size_t units);
  void matmul(const ConvUnit<float>& unit, std::span<const float> cols, std::size_t ncols, std::span<float> out) override;
  float min(std::size_t unit) const { return min_[unit]; }
  float max(std::size_t unit) const { return max_[unit]; }
  float abs_max(std::size_t unit) const;
  // Largest |W x| seen at the unit output (before bias).
  float output_abs_max(std::size_t unit) const { return out_abs_max_[unit]; }

 private:
  std::vector<float> min_, max_, out_abs_max_;
};

void observe_ranges(const Network<float>& net, const Dataset& calib, int batches, int batch_size, RangeObserver& obs);

struct QatConfig {
  int epochs = 3;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double plateau_factor = 0.1;
  int plateau_patience = 2;
  double range_momentum = 0.1;  // EMA of observed activation min/max
  int batch_size = 64;
  Augmentation augmentation;
  std::uint64_t seed = 0;
  QuantScheme scheme;

  void validate() const;
  friend bool operator==(const QatConfig&, const QatConfig&) = default;
};

// Fake quantization in the forward pass, straight-through estimator in the
// backward pass (inputs outside the clip range get zero gradient).
class FakeQuantHook final : public TrainHook<float> {
 public:
  FakeQuantHook(std::size_t units, const QuantScheme& scheme, double range_momentum);
  void weights(const ConvUnit<float>& unit, std::span<float> w) override;
  void input(const ConvUnit<float>& unit, std::span<float> x, std::span<std::uint8_t> pass) override;
  bool transforms_input() const override { return true; }
  const AffineQuant& input_quantizer(std::size_t unit) const { return quant_[unit]; }

 private:
  QuantScheme scheme_;
  double momentum_;
  std::vector<float> lo_, hi_;
  std::vector<bool> seen_;
  std::vector<AffineQuant> quant_;
};

// Adam with L2 weight decay and plateau-based rate reduction on the training
// loss. The quantized accuracy of the result is measured through ptq_int8;
// zero epochs leave the network untouched.
TrainHistory qat_train(Network<float>& net, const Dataset& train, const QatConfig& cfg);

}  // namespace analognas::nn
