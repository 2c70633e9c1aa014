#pragma once

// Row-major GEMM front end over Eigen. Everything compute-heavy in the layer
// stack funnels through these two calls, so this is the single place where
// the numeric backend is chosen. Single-threaded and deterministic.

#include <cstdint>

#include <Eigen/Core>

namespace sfminv::nn {

namespace detail {
template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;
}  // namespace detail

// C = A(MxK) * B(KxN) + beta * C. A, B, C contiguous row-major.
template <typename T>
void gemm(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C,
          T beta = T(0)) {
  detail::CMapRM<T> a(A, M, K);
  detail::CMapRM<T> b(B, K, N);
  detail::MapRM<T> c(C, M, N);
  if (beta == T(0))
    c.noalias() = a * b;
  else if (beta == T(1))
    c.noalias() += a * b;
  else {
    c *= beta;
    c.noalias() += a * b;
  }
}

// C = A^T(MxK from KxM) * B(KxN) + beta * C.
template <typename T>
void gemm_at(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C,
             T beta = T(0)) {
  detail::CMapRM<T> a(A, K, M);
  detail::CMapRM<T> b(B, K, N);
  detail::MapRM<T> c(C, M, N);
  if (beta == T(0))
    c.noalias() = a.transpose() * b;
  else if (beta == T(1))
    c.noalias() += a.transpose() * b;
  else {
    c *= beta;
    c.noalias() += a.transpose() * b;
  }
}

// C = A(MxK) * B^T(KxN from NxK) + beta * C.
template <typename T>
void gemm_bt(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C,
             T beta = T(0)) {
  detail::CMapRM<T> a(A, M, K);
  detail::CMapRM<T> b(B, N, K);
  detail::MapRM<T> c(C, M, N);
  if (beta == T(0))
    c.noalias() = a * b.transpose();
  else if (beta == T(1))
    c.noalias() += a * b.transpose();
  else {
    c *= beta;
    c.noalias() += a * b.transpose();
  }
}

}  // namespace sfminv::nn
