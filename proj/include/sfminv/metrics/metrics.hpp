#pragma once

// Evaluation metrics on [0,1] images: mean absolute error, SSIM with the
// reference configuration (11x11 Gaussian window, sigma 1.5, K1=0.01,
// K2=0.03, L=1, valid-window coverage, per channel then averaged), and
// visibility classification accuracy over occupied cells.

#include <array>
#include <cmath>

#include "sfminv/core/image.hpp"
#include "sfminv/geom/visibility.hpp"

namespace sfminv::metrics {

inline double mae(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width && a.channels == b.channels,
          errc::shape_mismatch, "mae: image shapes differ");
  double acc = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(double(a.data[i]) - b.data[i]);
  return acc / double(a.data.size());
}

namespace detail {

inline const std::array<double, 121>& ssim_window() {
  static const std::array<double, 121> w = [] {
    std::array<double, 121> out{};
    const double sigma = 1.5;
    double sum = 0;
    for (int r = 0; r < 11; ++r)
      for (int c = 0; c < 11; ++c) {
        const double dr = r - 5, dc = c - 5;
        out[std::size_t(r * 11 + c)] = std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma));
        sum += out[std::size_t(r * 11 + c)];
      }
    for (auto& v : out) v /= sum;
    return out;
  }();
  return w;
}

}  // namespace detail

inline double ssim(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width && a.channels == b.channels,
          errc::shape_mismatch, "ssim: image shapes differ");
  require(a.height >= 11 && a.width >= 11, errc::too_small, "ssim needs at least 11x11 images");
  constexpr double k1 = 0.01, k2 = 0.03, L = 1.0;
  constexpr double c1 = (k1 * L) * (k1 * L);
  constexpr double c2 = (k2 * L) * (k2 * L);
  const auto& win = detail::ssim_window();

  double total = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    double acc = 0;
    std::int64_t windows = 0;
    for (int r = 0; r + 11 <= a.height; ++r)
      for (int c = 0; c + 11 <= a.width; ++c) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = win[std::size_t(i * 11 + j)];
            const double x = a.at(r + i, c + j, ch);
            const double y = b.at(r + i, c + j, ch);
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cxy = sxy - mx * my;
        const double num = (2 * mx * my + c1) * (2 * cxy + c2);
        const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
        acc += num / den;
        ++windows;
      }
    total += acc / double(windows);
  }
  return total / double(a.channels);
}

// Fraction of occupied cells whose labels agree. Both masks must mark the
// same cells as occupied.
inline double visibility_accuracy(const geom::VisibilityMask& pred,
                                  const geom::VisibilityMask& truth) {
  require(pred.height == truth.height && pred.width == truth.width, errc::occupancy_mismatch,
          "mask dimensions differ");
  std::int64_t total = 0, match = 0;
  for (std::size_t i = 0; i < pred.state.size(); ++i) {
    const bool po = pred.state[i] != std::uint8_t(geom::Vis::unoccupied);
    const bool to = truth.state[i] != std::uint8_t(geom::Vis::unoccupied);
    require(po == to, errc::occupancy_mismatch, "masks disagree on occupancy");
    if (!po) continue;
    ++total;
    match += pred.state[i] == truth.state[i];
  }
  if (total == 0) return 1.0;
  return double(match) / double(total);
}

}  // namespace sfminv::metrics
