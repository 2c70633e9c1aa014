#pragma once

#include <cmath>

#include "sfminv/core/rng.hpp"
#include "sfminv/nn/tensor.hpp"

namespace sfminv::nn {

// Fan-in/fan-out from the weight shape: 4-d is a conv kernel (Co,Ci,kh,kw),
// 2-d a fully connected weight (Out,In).
inline std::pair<std::int64_t, std::int64_t> fan_in_out(const Shape& shape) {
  require(shape.size() == 2 || shape.size() == 4, errc::shape_mismatch,
          "xavier: fan not derivable from " + shape_str(shape));
  if (shape.size() == 2) return {shape[1], shape[0]};
  std::int64_t receptive = shape[2] * shape[3];
  return {shape[1] * receptive, shape[0] * receptive};
}

// Uniform Xavier/Glorot: +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_init(Shape shape, Rng& rng) {
  auto [fi, fo] = fan_in_out(shape);
  const double bound = std::sqrt(6.0 / double(fi + fo));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.v) v = T(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> xavier_init(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_init<T>(std::move(shape), rng);
}

}  // namespace sfminv::nn
