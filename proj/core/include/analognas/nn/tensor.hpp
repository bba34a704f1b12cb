#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace analognas::nn {

// Activation tensor with logical shape (batch, channels, height, width).
// Storage is channel-major: element (n, c, y, x) lives at ((c*N + n)*H + y)*W + x,
// so every channel is one contiguous N*H*W plane and a convolution is a single
// GEMM against the im2col matrix.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int batch, int channels, int height, int width, T fill = T{0})
      : n_(batch), c_(channels), h_(height), w_(width),
        data_(static_cast<std::size_t>(batch) * channels * height * width, fill) {
    assert(batch >= 0 && channels >= 0 && height >= 0 && width >= 0);
  }

  int batch() const { return n_; }
  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(n_) * h_ * w_; }
  std::size_t image_size() const { return static_cast<std::size_t>(h_) * w_; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::span<T> channel(int c) { return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()}; }
  std::span<const T> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }

  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(c) * n_ + n) * h_ + y) * w_ + x;
  }
  T& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  bool same_shape(const Tensor4& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
  std::string shape_string() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," + std::to_string(w_) + ")";
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  Tensor4& operator+=(const Tensor4& o) {
    assert(same_shape(o));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n_, c_, h_, w_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor4& a, const Tensor4& b) { return a.same_shape(b) && a.data_ == b.data_; }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

}  // namespace analognas::nn
