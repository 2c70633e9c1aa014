#pragma once

// Geometric visibility estimation for feature maps: the min-filter splatting
// test (VisibSparse-style) and mesh z-buffer comparison (VisibDense-style),
// plus batched ground-truth label generation.

#include <limits>
#include <vector>

#include "sfminv/geom/depth_render.hpp"
#include "sfminv/render/feature_map.hpp"
#include "sfminv/render/rasterize.hpp"

namespace sfminv::geom {

enum class Vis : std::uint8_t { unoccupied = 0, visible = 1, occluded = 2 };

struct VisibilityMask {
  int height = 0, width = 0;
  std::vector<std::uint8_t> state;

  VisibilityMask() = default;
  VisibilityMask(int h, int w) : height(h), width(w), state(std::size_t(h) * w, 0) {}

  Vis at(int r, int c) const { return Vis(state[std::size_t(r) * width + c]); }
  void set(int r, int c, Vis v) { state[std::size_t(r) * width + c] = std::uint8_t(v); }

  int count(Vis v) const {
    int n = 0;
    for (auto s : state) n += (s == std::uint8_t(v));
    return n;
  }
  int occupied() const { return int(state.size()) - count(Vis::unoccupied); }

  bool operator==(const VisibilityMask&) const = default;
};

// Min-filter splatting: a point stays visible when its depth exceeds the
// k x k neighborhood minimum (occupied cells only) by at most the fraction
// tau. A ratio test, so uniform depth scaling cannot change the mask.
inline VisibilityMask visib_sparse(const render::FeatureMap& map, int k = 3, double tau = 0.05) {
  require(k >= 1 && k % 2 == 1, errc::invalid_config, "min filter needs an odd kernel size");
  const int H = map.height, W = map.width, r = k / 2;
  VisibilityMask mask(H, W);
  for (int row = 0; row < H; ++row)
    for (int col = 0; col < W; ++col) {
      if (!map.occupied(row, col)) continue;
      double filtered = std::numeric_limits<double>::infinity();
      for (int dr = -r; dr <= r; ++dr)
        for (int dc = -r; dc <= r; ++dc) {
          const int rr = row + dr, cc = col + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          if (!map.occupied(rr, cc)) continue;
          filtered = std::min(filtered, map.raw_depth[map.cell(rr, cc)]);
        }
      const double d = map.raw_depth[map.cell(row, col)];
      mask.set(row, col, d <= (1.0 + tau) * filtered ? Vis::visible : Vis::occluded);
    }
  return mask;
}

// Mesh z-buffer comparison: occupied cells in front of (or on, within eps)
// the rendered surface are visible. No surface at a pixel means visible.
inline VisibilityMask visib_dense(const render::FeatureMap& map, const DepthBuffer& buffer,
                                  double eps = 0.01) {
  require(map.height == buffer.height && map.width == buffer.width, errc::dimension_mismatch,
          "feature map and depth buffer disagree on dimensions");
  VisibilityMask mask(map.height, map.width);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      if (!map.occupied(r, c)) continue;
      const double d = map.raw_depth[map.cell(r, c)];
      mask.set(r, c, d <= (1.0 + eps) * buffer.at(r, c) ? Vis::visible : Vis::occluded);
    }
  return mask;
}

struct LabeledScene {
  const colmap::SparseModel* model = nullptr;
  const TriangleMesh* mesh = nullptr;
  std::vector<render::ViewSpec> views;
};

// One (feature map, mask) pair per view, in dataset order.
inline std::vector<std::pair<render::FeatureMap, VisibilityMask>> generate_visibility_labels(
    const std::vector<LabeledScene>& dataset, const render::ChannelSchema& schema,
    double eps = 0.01) {
  std::vector<std::pair<render::FeatureMap, VisibilityMask>> out;
  for (const auto& scene : dataset)
    for (const auto& view : scene.views) {
      auto map = render::render_view(*scene.model, view, schema);
      auto mask = visib_dense(map, render_mesh_depth(*scene.mesh, view), eps);
      out.emplace_back(std::move(map), std::move(mask));
    }
  return out;
}

}  // namespace sfminv::geom
