#include "analognas/nn/train.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "analognas/errors.hpp"

namespace analognas::nn {

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 256;
  c.augmentation = {0.5, 4};
  c.normalize = true;
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
  if (epochs < 1) throw RangeError("train.epochs must be >= 1");
  if (!(base_lr > 0.0)) throw RangeError("train.base_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw RangeError("train.momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw RangeError("train.weight_decay must be >= 0");
  if (batch_size < 2) throw RangeError("train.batch_size must be >= 2");
  if (augmentation.flip_probability < 0.0 || augmentation.flip_probability > 1.0)
    throw RangeError("train.flip_probability must lie in [0, 1]");
  if (augmentation.pad_crop < 0) throw RangeError("train.pad_crop must be >= 0");
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return a.epochs == b.epochs && a.base_lr == b.base_lr && a.momentum == b.momentum && a.nesterov == b.nesterov &&
         a.weight_decay == b.weight_decay && a.batch_size == b.batch_size && a.schedule == b.schedule &&
         a.augmentation.flip_probability == b.augmentation.flip_probability &&
         a.augmentation.pad_crop == b.augmentation.pad_crop && a.normalize == b.normalize && a.seed == b.seed;
}

double cosine_lr(double base_lr, int epoch, int epochs) {
  if (epoch <= 0) return base_lr;
  if (epoch >= epochs) return 0.0;
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

void SgdOptimizer::step(const std::vector<Param<float>*>& params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto* p : params) velocity_.emplace_back(p->size(), 0.0f);
  }
  const auto mu = static_cast<float>(momentum_), wd = static_cast<float>(weight_decay_), rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float g = p.grad[j] + wd * p.value[j];
      v[j] = mu * v[j] + g;
      p.value[j] -= rate * (nesterov_ ? g + mu * v[j] : v[j]);
    }
  }
}

void AdamOptimizer::step(const std::vector<Param<float>*>& params, double lr) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto* p : params) {
      m_.emplace_back(p->size(), 0.0f);
      v_.emplace_back(p->size(), 0.0f);
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_), wd = static_cast<float>(weight_decay_);
  const auto step_size = static_cast<float>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float g = p.grad[j] + wd * p.value[j];
      m_[i][j] = b1 * m_[i][j] + (1.0f - b1) * g;
      v_[i][j] = b2 * v_[i][j] + (1.0f - b2) * g * g;
      p.value[j] -= step_size * m_[i][j] / (std::sqrt(v_[i][j]) * inv_sqrt_bc2 + eps);
    }
  }
}

double PlateauScheduler::observe(double loss) {
  if (!has_best_ || loss < best_ * (1.0 - threshold_)) {
    best_ = loss;
    has_best_ = true;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ > patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

TrainHistory run_training_loop(Network<float>& net, const Dataset& train, const LoopConfig& loop, Optimizer& opt,
                               const std::function<double(int, double)>& lr_for_epoch, TrainHook<float>* hook) {
  if (train.empty()) throw EmptyInputError("training set is empty");
  Rng rng(loop.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto params = net.params();
  TrainHistory history;
  double previous_loss = std::numeric_limits<double>::quiet_NaN();
  for (int epoch = 0; epoch < loop.epochs; ++epoch) {
    const double lr = lr_for_epoch(epoch, previous_loss);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double loss_sum = 0.0;
    long correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(loop.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(loop.batch_size));
      if (end - start < 2) break;  // batch-norm statistics need two samples
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor4<float> x = make_batch<float>(train, idx, loop.augmentation, rng);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t k : idx) labels.push_back(train.labels[k]);
      net.zero_grad();
      const Tensor4<float> logits = net.forward_train(x, hook);
      Tensor4<float> dlogits;
      const LossResult r = softmax_cross_entropy(logits, labels, &dlogits);
      if (!std::isfinite(r.loss) || !logits.all_finite()) throw DivergenceError(epoch);
      net.backward(dlogits);
      opt.step(params, lr);
      loss_sum += r.loss * static_cast<double>(idx.size());
      correct += r.correct;
      seen += static_cast<long>(idx.size());
    }
    const double mean_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    history.push_back({epoch, lr, mean_loss, seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0});
    previous_loss = mean_loss;
  }
  return history;
}

TrainHistory sgd_train(Network<float>& net, const Dataset& train, const TrainConfig& cfg, TrainHook<float>* hook) {
  cfg.validate();
  SgdOptimizer opt(cfg.momentum, cfg.nesterov, cfg.weight_decay);
  const LoopConfig loop{cfg.epochs, cfg.batch_size, cfg.augmentation, cfg.seed};
  const auto schedule = [&cfg](int epoch, double) {
    return cfg.schedule == LrSchedule::cosine ? cosine_lr(cfg.base_lr, epoch, cfg.epochs) : cfg.base_lr;
  };
  return run_training_loop(net, train, loop, opt, schedule, hook);
}

namespace {
constexpr std::size_t kEvalBatch = 50;
}

std::vector<int> predict(const Network<float>& net, const Dataset& data, UnitExecutor<float>& exec) {
  std::vector<int> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    const std::size_t end = std::min(data.size(), start + kEvalBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = net.forward_infer(make_batch<float>(data, idx), exec);
    const auto cls = argmax_classes(logits);
    out.insert(out.end(), cls.begin(), cls.end());
  }
  return out;
}

double accuracy_of(std::span<const int> predictions, std::span<const int> labels) {
  if (labels.empty()) throw EmptyInputError("cannot compute accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate_accuracy(const Network<float>& net, const Dataset& test, UnitExecutor<float>& exec) {
  if (test.empty()) throw EmptyInputError("cannot evaluate on an empty dataset");
  const auto pred = predict(net, test, exec);
  return accuracy_of(pred, test.labels);
}

double evaluate_accuracy(const Network<float>& net, const Dataset& test) {
  DigitalExecutor<float> exec;
  return evaluate_accuracy(net, test, exec);
}

}  // namespace analognas::nn
