#include "analognas/nn/linalg.hpp"

#include <Eigen/Core>

namespace analognas::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;

template <typename Dst, typename Expr>
void assign(Dst& dst, const Expr& expr, bool accumulate) {
  if (accumulate)
    dst.noalias() += expr;
  else
    dst.noalias() = expr;
}

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k), ni = static_cast<Eigen::Index>(n);
  MMap<T> cm(c, mi, ni);
  if (k == 0) {
    if (!accumulate) cm.setZero();
    return;
  }
  assign(cm, CMap<T>(a, mi, ki) * CMap<T>(b, ki, ni), accumulate);
}

template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k), ni = static_cast<Eigen::Index>(n);
  MMap<T> cm(c, mi, ni);
  if (k == 0) {
    if (!accumulate) cm.setZero();
    return;
  }
  assign(cm, CMap<T>(a, mi, ki) * CMap<T>(b, ni, ki).transpose(), accumulate);
}

template <typename T>
void gemm_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k), ni = static_cast<Eigen::Index>(n);
  MMap<T> cm(c, mi, ni);
  if (k == 0) {
    if (!accumulate) cm.setZero();
    return;
  }
  assign(cm, CMap<T>(a, ki, mi).transpose() * CMap<T>(b, ki, ni), accumulate);
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);
template void gemm_bt<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
template void gemm_bt<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);
template void gemm_at<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
template void gemm_at<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);

}  // namespace analognas::nn
