#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"

namespace sfminv::nn {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

// Dense n-dimensional array, row-major. Plain value type: copyable, movable,
// no view semantics. Gradients live in a second Tensor of the same shape.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), v(std::size_t(shape_numel(shape)), T(0)) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), v(std::move(values)) {
    require(std::int64_t(v.size()) == shape_numel(shape), errc::shape_mismatch,
            "tensor data does not match shape " + shape_str(shape));
  }

  std::int64_t numel() const { return std::int64_t(v.size()); }
  std::int64_t size(int i) const { return shape[std::size_t(i)]; }
  int rank() const { return int(shape.size()); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  // NCHW accessors for the 4-d case.
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return v[std::size_t(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  T at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return v[std::size_t(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }
  void zero() { fill(T(0)); }

  Tensor reshaped(Shape s) const {
    require(shape_numel(s) == numel(), errc::shape_mismatch,
            "reshape " + shape_str(shape) + " -> " + shape_str(s));
    Tensor out;
    out.shape = std::move(s);
    out.v = v;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require(a.shape == b.shape, errc::shape_mismatch,
          std::string(what) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace sfminv::nn
