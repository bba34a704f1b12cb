#include "analognas/nn/network.hpp"

#include "analognas/errors.hpp"

namespace analognas::nn {

using space::OpKind;

void MacroConfig::validate() const {
  if (stem_channels < 1) throw RangeError("macro.stem_channels must be >= 1");
  if (cells_per_stage < 1) throw RangeError("macro.cells_per_stage must be >= 1");
  if (num_classes < 2) throw RangeError("macro.num_classes must be >= 2");
  if (input_channels < 1) throw RangeError("macro.input_channels must be >= 1");
  if (input_hw < 4 || input_hw % 4 != 0) throw RangeError("macro.input_hw must be a positive multiple of 4");
}

std::size_t closed_form_parameter_count(const space::CellEncoding& enc, const MacroConfig& macro) {
  const auto bn = [](std::size_t c) { return 2 * c; };
  const auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) { return cin * cout * k * k; };
  const auto c0 = static_cast<std::size_t>(macro.stem_channels);
  std::size_t total = conv(static_cast<std::size_t>(macro.input_channels), c0, 3) + bn(c0);
  for (int s = 0; s < MacroConfig::kNumStages; ++s) {
    const auto c = static_cast<std::size_t>(macro.stage_channels(s));
    std::size_t per_cell = 0;
    for (OpKind op : enc.ops()) {
      if (op == OpKind::conv3x3) per_cell += conv(c, c, 3) + bn(c);
      if (op == OpKind::conv1x1) per_cell += conv(c, c, 1) + bn(c);
    }
    total += per_cell * static_cast<std::size_t>(macro.cells_per_stage);
    if (s + 1 < MacroConfig::kNumStages)
      total += conv(c, 2 * c, 3) + bn(2 * c) + conv(2 * c, 2 * c, 3) + bn(2 * c) + conv(c, 2 * c, 1);
  }
  const auto c_last = static_cast<std::size_t>(macro.stage_channels(MacroConfig::kNumStages - 1));
  total += bn(c_last) + c_last * static_cast<std::size_t>(macro.num_classes) + static_cast<std::size_t>(macro.num_classes);
  return total;
}

// ---------------------------------------------------------------------------

template <typename T>
CellEdge<T>::CellEdge(OpKind op, int channels, const std::string& name) : op_(op) {
  if (op == OpKind::conv3x3) conv_.emplace(ConvGeometry{channels, channels, 3, 1, 1}, false, true, name);
  if (op == OpKind::conv1x1) conv_.emplace(ConvGeometry{channels, channels, 1, 1, 0}, false, true, name);
}

template <typename T>
std::optional<Tensor4<T>> CellEdge<T>::forward_train(const Tensor4<T>& x, TrainHook<T>* hook) {
  switch (op_) {
    case OpKind::zeroize:
      return std::nullopt;
    case OpKind::skip:
      return x;
    case OpKind::avg_pool3x3:
      return avg_pool3x3_forward(x);
    case OpKind::conv3x3:
    case OpKind::conv1x1:
      input_ = x;
      return conv_->forward_train(relu_forward(x), hook);
  }
  return std::nullopt;
}

template <typename T>
Tensor4<T> CellEdge<T>::backward(const Tensor4<T>& dy) {
  switch (op_) {
    case OpKind::skip:
      return dy;
    case OpKind::avg_pool3x3:
      return avg_pool3x3_backward(dy);
    case OpKind::conv3x3:
    case OpKind::conv1x1:
      return relu_backward(input_, conv_->backward(dy));
    case OpKind::zeroize:
      break;
  }
  return Tensor4<T>(dy.batch(), dy.channels(), dy.height(), dy.width());
}

template <typename T>
std::optional<Tensor4<T>> CellEdge<T>::forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const {
  switch (op_) {
    case OpKind::zeroize:
      return std::nullopt;
    case OpKind::skip:
      return x;
    case OpKind::avg_pool3x3:
      return avg_pool3x3_forward(x);
    case OpKind::conv3x3:
    case OpKind::conv1x1:
      return conv_->forward_infer(relu_forward(x), exec);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void accumulate(Tensor4<T>& node, std::optional<Tensor4<T>>&& contribution) {
  if (contribution) node += *contribution;
}

}  // namespace

template <typename T>
Cell<T>::Cell(const space::CellEncoding& enc, int channels, const std::string& name) {
  for (int e = 0; e < space::kNumEdges; ++e) {
    const auto& edge = space::kEdges[static_cast<std::size_t>(e)];
    edges_[static_cast<std::size_t>(e)] =
        CellEdge<T>(enc.op(e), channels, name + ".e" + std::to_string(edge.from) + std::to_string(edge.to));
  }
}

template <typename T>
Tensor4<T> Cell<T>::forward_train(const Tensor4<T>& x, TrainHook<T>* hook) {
  n_ = x.batch();
  c_ = x.channels();
  h_ = x.height();
  w_ = x.width();
  Tensor4<T> n1(n_, c_, h_, w_), n2(n_, c_, h_, w_), n3(n_, c_, h_, w_);
  accumulate(n1, edges_[0].forward_train(x, hook));
  accumulate(n2, edges_[1].forward_train(x, hook));
  accumulate(n2, edges_[2].forward_train(n1, hook));
  accumulate(n3, edges_[3].forward_train(x, hook));
  accumulate(n3, edges_[4].forward_train(n1, hook));
  accumulate(n3, edges_[5].forward_train(n2, hook));
  return n3;
}

template <typename T>
Tensor4<T> Cell<T>::backward(const Tensor4<T>& dy) {
  Tensor4<T> d0(n_, c_, h_, w_), d1(n_, c_, h_, w_), d2(n_, c_, h_, w_);
  std::array<Tensor4<T>*, 3> grads{&d0, &d1, &d2};
  const auto back = [&](int e, const Tensor4<T>& upstream) {
    auto& edge = edges_[static_cast<std::size_t>(e)];
    if (edge.is_zero()) return;
    *grads[static_cast<std::size_t>(space::kEdges[static_cast<std::size_t>(e)].from)] += edge.backward(upstream);
  };
  back(3, dy);
  back(4, dy);
  back(5, dy);
  back(1, d2);
  back(2, d2);
  back(0, d1);
  return d0;
}

template <typename T>
Tensor4<T> Cell<T>::forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const {
  const int n = x.batch(), c = x.channels(), h = x.height(), w = x.width();
  Tensor4<T> n1(n, c, h, w), n2(n, c, h, w), n3(n, c, h, w);
  accumulate(n1, edges_[0].forward_infer(x, exec));
  accumulate(n2, edges_[1].forward_infer(x, exec));
  accumulate(n2, edges_[2].forward_infer(n1, exec));
  accumulate(n3, edges_[3].forward_infer(x, exec));
  accumulate(n3, edges_[4].forward_infer(n1, exec));
  accumulate(n3, edges_[5].forward_infer(n2, exec));
  return n3;
}

// ---------------------------------------------------------------------------

template <typename T>
ReductionBlock<T>::ReductionBlock(int in_channels, const std::string& name)
    : a_(ConvGeometry{in_channels, 2 * in_channels, 3, 2, 1}, false, true, name + ".conv_a"),
      b_(ConvGeometry{2 * in_channels, 2 * in_channels, 3, 1, 1}, false, true, name + ".conv_b"),
      shortcut_(ConvGeometry{in_channels, 2 * in_channels, 1, 1, 0}, false, false, name + ".shortcut") {}

template <typename T>
Tensor4<T> ReductionBlock<T>::forward_train(const Tensor4<T>& x, TrainHook<T>* hook) {
  x_ = x;
  a_out_ = a_.forward_train(relu_forward(x), hook);
  Tensor4<T> out = b_.forward_train(relu_forward(a_out_), hook);
  out += shortcut_.forward_train(avg_pool2x2_forward(x), hook);
  return out;
}

template <typename T>
Tensor4<T> ReductionBlock<T>::backward(const Tensor4<T>& dy) {
  Tensor4<T> da = relu_backward(a_out_, b_.backward(dy));
  Tensor4<T> dx = relu_backward(x_, a_.backward(da));
  dx += avg_pool2x2_backward(shortcut_.backward(dy), x_.height(), x_.width());
  return dx;
}

template <typename T>
Tensor4<T> ReductionBlock<T>::forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const {
  Tensor4<T> a_out = a_.forward_infer(relu_forward(x), exec);
  Tensor4<T> out = b_.forward_infer(relu_forward(a_out), exec);
  out += shortcut_.forward_infer(avg_pool2x2_forward(x), exec);
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(const space::CellEncoding& enc, const MacroConfig& macro, std::uint64_t seed)
    : enc_(enc), macro_(macro) {
  macro.validate();
  stem_ = ConvUnit<T>(ConvGeometry{macro.input_channels, macro.stem_channels, 3, 1, 1}, false, true, "stem");
  stages_.resize(MacroConfig::kNumStages);
  for (int s = 0; s < MacroConfig::kNumStages; ++s) {
    const int c = macro.stage_channels(s);
    for (int i = 0; i < macro.cells_per_stage; ++i)
      stages_[static_cast<std::size_t>(s)].emplace_back(enc, c, "stage" + std::to_string(s) + ".cell" + std::to_string(i));
    if (s + 1 < MacroConfig::kNumStages) reductions_.emplace_back(c, "reduce" + std::to_string(s));
  }
  final_bn_ = BatchNorm<T>(macro.stage_channels(MacroConfig::kNumStages - 1), "lastact");
  head_ = ConvUnit<T>(ConvGeometry{macro.stage_channels(MacroConfig::kNumStages - 1), macro.num_classes, 1, 1, 0}, true,
                      false, "classifier");
  assign_unit_ids();
  Rng rng(seed);
  for (ConvUnit<T>* u : units()) u->init(rng);
}

template <typename T>
std::vector<ConvUnit<T>*> Network<T>::units() {
  std::vector<ConvUnit<T>*> out{&stem_};
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (auto& cell : stages_[s])
      for (auto& edge : cell.edges())
        if (edge.conv()) out.push_back(&*edge.conv());
    if (s < reductions_.size()) {
      out.push_back(&reductions_[s].conv_a());
      out.push_back(&reductions_[s].conv_b());
      out.push_back(&reductions_[s].shortcut());
    }
  }
  out.push_back(&head_);
  return out;
}

template <typename T>
std::vector<const ConvUnit<T>*> Network<T>::units() const {
  auto mutable_units = const_cast<Network<T>*>(this)->units();
  return {mutable_units.begin(), mutable_units.end()};
}

template <typename T>
void Network<T>::assign_unit_ids() {
  std::size_t id = 0;
  for (ConvUnit<T>* u : units()) u->set_id(id++);
}

template <typename T>
Tensor4<T> Network<T>::forward_train(const Tensor4<T>& x, TrainHook<T>* hook) {
  Tensor4<T> h = stem_.forward_train(x, hook);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (auto& cell : stages_[s]) h = cell.forward_train(h, hook);
    if (s < reductions_.size()) h = reductions_[s].forward_train(h, hook);
  }
  last_h_ = h.height();
  last_w_ = h.width();
  final_pre_ = final_bn_.forward_train(h);
  return head_.forward_train(global_avg_pool_forward(relu_forward(final_pre_)), hook);
}

template <typename T>
void Network<T>::backward(const Tensor4<T>& dlogits) {
  Tensor4<T> d = global_avg_pool_backward(head_.backward(dlogits), last_h_, last_w_);
  d = final_bn_.backward(relu_backward(final_pre_, d));
  for (std::size_t s = stages_.size(); s-- > 0;) {
    if (s < reductions_.size()) d = reductions_[s].backward(d);
    for (auto it = stages_[s].rbegin(); it != stages_[s].rend(); ++it) d = it->backward(d);
  }
  stem_.backward(d);
}

template <typename T>
Tensor4<T> Network<T>::forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const {
  Tensor4<T> h = stem_.forward_infer(x, exec);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& cell : stages_[s]) h = cell.forward_infer(h, exec);
    if (s < reductions_.size()) h = reductions_[s].forward_infer(h, exec);
  }
  final_bn_.apply_eval(h);
  return head_.forward_infer(global_avg_pool_forward(relu_forward(h)), exec);
}

template <typename T>
Tensor4<T> Network<T>::forward_infer(const Tensor4<T>& x) const {
  DigitalExecutor<T> exec;
  return forward_infer(x, exec);
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (ConvUnit<T>* u : units()) u->collect_params(out);
  out.push_back(&final_bn_.gamma);
  out.push_back(&final_bn_.beta);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (Param<T>* p : params()) p->zero_grad();
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const ConvUnit<T>* u : units()) n += u->parameter_count();
  return n + final_bn_.gamma.size() + final_bn_.beta.size();
}

template <typename T>
void Network<T>::fold_batch_norm() {
  for (ConvUnit<T>* u : units()) u->fold_batch_norm();
  folded_ = true;
}

template class CellEdge<float>;
template class CellEdge<double>;
template class Cell<float>;
template class Cell<double>;
template class ReductionBlock<float>;
template class ReductionBlock<double>;
template class Network<float>;
template class Network<double>;

}  // namespace analognas::nn
