#pragma once

#include <cstddef>

namespace analognas::nn {

// Row-major dense products used by the convolution and crossbar kernels.
// All single-threaded and deterministic.

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

}  // namespace analognas::nn
