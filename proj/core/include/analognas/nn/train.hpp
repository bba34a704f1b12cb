#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "analognas/nn/dataset.hpp"
#include "analognas/nn/network.hpp"

namespace analognas::nn {

enum class LrSchedule { cosine, constant };

struct TrainConfig {
  int epochs = 10;
  double base_lr = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  int batch_size = 64;
  LrSchedule schedule = LrSchedule::cosine;
  Augmentation augmentation;
  bool normalize = false;  // per-channel standardization from training-set statistics
  std::uint64_t seed = 0;

  // 200 epochs, flip 0.5, pad-4 crop, per-channel normalization.
  static TrainConfig paper();
  static TrainConfig desk();
  void validate() const;
  friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

// 0.5 * base * (1 + cos(pi * epoch / epochs)); exactly base at 0 and 0 at epochs.
double cosine_lr(double base_lr, int epoch, int epochs);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Param<float>*>& params, double lr) = 0;
};

// PyTorch-style SGD: g += wd*w; v = mu*v + g; w -= lr * (nesterov ? g + mu*v : v).
class SgdOptimizer final : public Optimizer {
 public:
  SgdOptimizer(double momentum, bool nesterov, double weight_decay)
      : momentum_(momentum), nesterov_(nesterov), weight_decay_(weight_decay) {}
  void step(const std::vector<Param<float>*>& params, double lr) override;

 private:
  double momentum_;
  bool nesterov_;
  double weight_decay_;
  std::vector<std::vector<float>> velocity_;
};

// Adam with L2 weight decay folded into the gradient.
class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const std::vector<Param<float>*>& params, double lr) override;

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Multiplies the rate by `factor` once the monitored loss has not improved
// (relative threshold) for more than `patience` epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double threshold = 1e-4)
      : lr_(lr), factor_(factor), patience_(patience), threshold_(threshold) {}
  double lr() const { return lr_; }
  double observe(double loss);

 private:
  double lr_, factor_;
  int patience_;
  double threshold_;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

struct LoopConfig {
  int epochs = 1;
  int batch_size = 64;
  Augmentation augmentation;
  std::uint64_t seed = 0;
};

// Shared mini-batch loop. lr_for_epoch(epoch, previous_epoch_loss) supplies
// the rate; throws DivergenceError on a non-finite loss.
TrainHistory run_training_loop(Network<float>& net, const Dataset& train, const LoopConfig& loop, Optimizer& opt,
                               const std::function<double(int, double)>& lr_for_epoch, TrainHook<float>* hook);

// Nesterov SGD with cosine annealing to zero, weight decay and augmentation.
TrainHistory sgd_train(Network<float>& net, const Dataset& train, const TrainConfig& cfg,
                       TrainHook<float>* hook = nullptr);

// Top-1 accuracy in [0, 1] with batch-norm running statistics.
double evaluate_accuracy(const Network<float>& net, const Dataset& test);
double evaluate_accuracy(const Network<float>& net, const Dataset& test, UnitExecutor<float>& exec);
std::vector<int> predict(const Network<float>& net, const Dataset& data, UnitExecutor<float>& exec);
double accuracy_of(std::span<const int> predictions, std::span<const int> labels);

}  // namespace analognas::nn
