#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "analognas/nn/tensor.hpp"
#include "analognas/rng.hpp"

namespace analognas::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, T{0}), grad(size, T{0}) {}
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int fan_in() const { return in_channels * kernel * kernel; }
  int out_extent(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

// cols is [fan_in x (N*Ho*Wo)] row-major; row index (ci, ky, kx), column (n, y, x).
template <typename T>
void im2col(const Tensor4<T>& x, const ConvGeometry& g, std::vector<T>& cols);
// Scatter-adds cols back into dx (shape of the convolution input).
template <typename T>
void col2im(std::span<const T> cols, const ConvGeometry& g, Tensor4<T>& dx);

template <typename T>
class ConvUnit;

// Training-time perturbation of weight layers (fake quantization, hardware
// noise). Gradients are taken with respect to the transformed weights and
// applied to the stored ones (straight-through).
template <typename T>
class TrainHook {
 public:
  virtual ~TrainHook() = default;
  virtual void weights(const ConvUnit<T>& /*unit*/, std::span<T> /*w*/) {}
  // Clear pass[i] to stop the gradient through input element i.
  virtual void input(const ConvUnit<T>& /*unit*/, std::span<T> /*x*/, std::span<std::uint8_t> /*pass*/) {}
  virtual void output(const ConvUnit<T>& /*unit*/, std::span<T> /*y*/) {}
  virtual bool transforms_input() const { return false; }
};

// Computes out[rows x ncols] = W * cols for a weight layer at inference time.
// Bias and batch norm are applied digitally by the caller.
template <typename T>
class UnitExecutor {
 public:
  virtual ~UnitExecutor() = default;
  // Elementwise input transform applied to the activation before im2col.
  virtual void input(const ConvUnit<T>& /*unit*/, std::span<T> /*x*/) {}
  virtual bool transforms_input() const { return false; }
  virtual void matmul(const ConvUnit<T>& unit, std::span<const T> cols, std::size_t ncols, std::span<T> out) = 0;
};

template <typename T>
class DigitalExecutor final : public UnitExecutor<T> {
 public:
  void matmul(const ConvUnit<T>& unit, std::span<const T> cols, std::size_t ncols, std::span<T> out) override;
};

template <typename T>
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  BatchNorm() = default;
  BatchNorm(int channels, const std::string& name);

  Tensor4<T> forward_train(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& dy);
  void apply_eval(Tensor4<T>& x) const;
  // Per-channel multiplier gamma / sqrt(running_var + eps).
  T eval_scale(int c) const;

  int channels() const { return static_cast<int>(gamma.size()); }

  Param<T> gamma;
  Param<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;

 private:
  std::vector<T> xhat_;
  std::vector<T> inv_std_;
};

// Weight-bearing layer: convolution with optional bias and optional trailing
// batch norm. A fully connected layer is a 1x1 convolution over 1x1 maps.
template <typename T>
class ConvUnit {
 public:
  ConvUnit() = default;
  ConvUnit(ConvGeometry g, bool bias, bool batch_norm, std::string name);

  // Kaiming-normal conv weights; uniform(+-1/sqrt(fan_in)) when the unit has a bias.
  void init(Rng& rng);

  Tensor4<T> forward_train(const Tensor4<T>& x, TrainHook<T>* hook);
  Tensor4<T> backward(const Tensor4<T>& dy);
  Tensor4<T> forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const;

  // Absorbs the eval-mode batch norm into weight and bias.
  void fold_batch_norm();

  const ConvGeometry& geometry() const { return geom_; }
  int rows() const { return geom_.out_channels; }
  int fan_in() const { return geom_.fan_in(); }
  std::size_t id() const { return id_; }
  void set_id(std::size_t id) { id_ = id; }
  const std::string& name() const { return name_; }

  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  bool has_bias() const { return bias_.has_value(); }
  Param<T>& bias() { return *bias_; }
  const Param<T>& bias() const { return *bias_; }
  bool has_batch_norm() const { return bn_.has_value(); }
  BatchNorm<T>& batch_norm() { return *bn_; }
  const BatchNorm<T>& batch_norm() const { return *bn_; }

  void collect_params(std::vector<Param<T>*>& out);
  std::size_t parameter_count() const;

 private:
  Tensor4<T> output_shape(const Tensor4<T>& x) const;

  ConvGeometry geom_;
  std::string name_;
  std::size_t id_ = 0;
  Param<T> weight_;
  std::optional<Param<T>> bias_;
  std::optional<BatchNorm<T>> bn_;

  // Training caches.
  std::vector<T> cols_;
  std::vector<T> w_eff_;
  std::vector<std::uint8_t> pass_;
  int in_n_ = 0, in_h_ = 0, in_w_ = 0;
};

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);
// dy masked by x > 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy);

// 3x3 average pool, stride 1, padding 1, padded cells excluded from the count.
template <typename T>
Tensor4<T> avg_pool3x3_forward(const Tensor4<T>& x);
template <typename T>
Tensor4<T> avg_pool3x3_backward(const Tensor4<T>& dy);

// 2x2 average pool, stride 2 (odd trailing row/column dropped).
template <typename T>
Tensor4<T> avg_pool2x2_forward(const Tensor4<T>& x);
template <typename T>
Tensor4<T> avg_pool2x2_backward(const Tensor4<T>& dy, int in_h, int in_w);

template <typename T>
Tensor4<T> global_avg_pool_forward(const Tensor4<T>& x);
template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& dy, int in_h, int in_w);

struct LossResult {
  double loss = 0.0;
  int correct = 0;
};

// Mean softmax cross-entropy over the batch. logits has shape (N, K, 1, 1).
// Writes dlogits = d(mean loss)/d(logits) when requested.
template <typename T>
LossResult softmax_cross_entropy(const Tensor4<T>& logits, std::span<const int> labels, Tensor4<T>* dlogits);

// Arg-max class per sample; ties resolve to the lowest class index.
template <typename T>
std::vector<int> argmax_classes(const Tensor4<T>& logits);

}  // namespace analognas::nn
