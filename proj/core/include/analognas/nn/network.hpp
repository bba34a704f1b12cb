#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "analognas/nn/layers.hpp"
#include "analognas/search_space.hpp"

namespace analognas::nn {

struct MacroConfig {
  static constexpr int kNumStages = 3;

  int stem_channels = 8;
  int cells_per_stage = 1;
  int num_classes = 10;
  int input_hw = 16;
  int input_channels = 3;

  // Desk-scale default: 8 stem channels, one cell per stage, 16x16 inputs.
  static MacroConfig desk() { return {}; }
  // Full NAS-Bench-201 macro: 16 stem channels, 5 cells per stage, 32x32 RGB.
  static MacroConfig nb201() { return {16, 5, 10, 32, 3}; }

  void validate() const;
  // Channels double at each reduction block.
  int stage_channels(int stage) const { return stem_channels << stage; }

  friend bool operator==(const MacroConfig&, const MacroConfig&) = default;
};

// Parameter count derived per layer kind, independent of Network.
std::size_t closed_form_parameter_count(const space::CellEncoding& enc, const MacroConfig& macro);

// One cell edge. Conv edges are ReLU -> conv -> batch norm.
template <typename T>
class CellEdge {
 public:
  CellEdge() = default;
  CellEdge(space::OpKind op, int channels, const std::string& name);

  space::OpKind op() const { return op_; }
  bool is_zero() const { return op_ == space::OpKind::zeroize; }
  // Zeroize edges return nullopt instead of materializing zeros.
  std::optional<Tensor4<T>> forward_train(const Tensor4<T>& x, TrainHook<T>* hook);
  Tensor4<T> backward(const Tensor4<T>& dy);
  std::optional<Tensor4<T>> forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const;

  std::optional<ConvUnit<T>>& conv() { return conv_; }
  const std::optional<ConvUnit<T>>& conv() const { return conv_; }

 private:
  space::OpKind op_ = space::OpKind::zeroize;
  std::optional<ConvUnit<T>> conv_;
  Tensor4<T> input_;
};

// Node i is the elementwise sum of its incoming edge outputs; node 3 is the output.
template <typename T>
class Cell {
 public:
  Cell() = default;
  Cell(const space::CellEncoding& enc, int channels, const std::string& name);

  Tensor4<T> forward_train(const Tensor4<T>& x, TrainHook<T>* hook);
  Tensor4<T> backward(const Tensor4<T>& dy);
  Tensor4<T> forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const;

  std::array<CellEdge<T>, space::kNumEdges>& edges() { return edges_; }
  const std::array<CellEdge<T>, space::kNumEdges>& edges() const { return edges_; }

 private:
  std::array<CellEdge<T>, space::kNumEdges> edges_;
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// Residual basic block, stride 2, channel doubling:
//   out = BN(conv3x3(ReLU(BN(conv3x3_s2(ReLU(x)))))) + conv1x1(avgpool2x2(x))
template <typename T>
class ReductionBlock {
 public:
  ReductionBlock() = default;
  ReductionBlock(int in_channels, const std::string& name);

  Tensor4<T> forward_train(const Tensor4<T>& x, TrainHook<T>* hook);
  Tensor4<T> backward(const Tensor4<T>& dy);
  Tensor4<T> forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const;

  ConvUnit<T>& conv_a() { return a_; }
  ConvUnit<T>& conv_b() { return b_; }
  ConvUnit<T>& shortcut() { return shortcut_; }
  const ConvUnit<T>& conv_a() const { return a_; }
  const ConvUnit<T>& conv_b() const { return b_; }
  const ConvUnit<T>& shortcut() const { return shortcut_; }

 private:
  ConvUnit<T> a_, b_, shortcut_;
  Tensor4<T> x_, a_out_;
};

// NAS-Bench-201 macro network: stem (conv3x3 + BN), three stages of N cells
// separated by two reduction blocks, then batch norm + ReLU, global average
// pool and an affine classifier.
template <typename T>
class Network {
 public:
  Network(const space::CellEncoding& enc, const MacroConfig& macro, std::uint64_t seed);

  Tensor4<T> forward_train(const Tensor4<T>& x, TrainHook<T>* hook = nullptr);
  // Accumulates parameter gradients from dlogits of the last forward_train.
  void backward(const Tensor4<T>& dlogits);
  Tensor4<T> forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const;
  Tensor4<T> forward_infer(const Tensor4<T>& x) const;

  std::vector<Param<T>*> params();
  void zero_grad();
  std::size_t parameter_count() const;

  // Weight units in a fixed traversal order (stem, stage cells and reduction
  // blocks, head); unit.id() is the position in this list.
  std::vector<ConvUnit<T>*> units();
  std::vector<const ConvUnit<T>*> units() const;

  // Folds every batch norm into its convolution (eval statistics).
  void fold_batch_norm();
  bool folded() const { return folded_; }

  const space::CellEncoding& encoding() const { return enc_; }
  const MacroConfig& macro() const { return macro_; }
  // Standalone batch norm ahead of the classifier; stays digital.
  const BatchNorm<T>& final_norm() const { return final_bn_; }

 private:
  void assign_unit_ids();

  space::CellEncoding enc_;
  MacroConfig macro_;
  ConvUnit<T> stem_;
  std::vector<std::vector<Cell<T>>> stages_;
  std::vector<ReductionBlock<T>> reductions_;
  BatchNorm<T> final_bn_;
  ConvUnit<T> head_;
  Tensor4<T> final_pre_;
  bool folded_ = false;
  int last_h_ = 0, last_w_ = 0;
};

}  // namespace analognas::nn
