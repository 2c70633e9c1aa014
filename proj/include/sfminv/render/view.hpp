#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "sfminv/colmap/model.hpp"
#include "sfminv/core/rng.hpp"

namespace sfminv::render {

// Rigid world-to-camera transform stored as unit quaternion plus translation.
struct Pose {
  std::array<double, 4> rotation = {1, 0, 0, 0};  // (w, x, y, z)
  std::array<double, 3> translation = {0, 0, 0};

  std::array<std::array<double, 3>, 3> rotation_matrix() const {
    const double w = rotation[0], x = rotation[1], y = rotation[2], z = rotation[3];
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
             {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
             {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
  }

  std::array<double, 3> to_camera(const std::array<double, 3>& p) const {
    const auto R = rotation_matrix();
    return {R[0][0] * p[0] + R[0][1] * p[1] + R[0][2] * p[2] + translation[0],
            R[1][0] * p[0] + R[1][1] * p[1] + R[1][2] * p[2] + translation[1],
            R[2][0] * p[0] + R[2][1] * p[1] + R[2][2] * p[2] + translation[2]};
  }
};

struct ViewSpec {
  Pose pose;
  colmap::CameraIntrinsics intrinsics;
  int out_width = 0, out_height = 0;
};

inline ViewSpec view_from_image(const colmap::SparseModel& model, std::uint32_t image_id) {
  auto it = model.images.find(image_id);
  require(it != model.images.end(), errc::unknown_image_id,
          "image " + std::to_string(image_id) + " not in model");
  const auto& img = it->second;
  ViewSpec view;
  view.pose.rotation = img.rotation;
  view.pose.translation = img.translation;
  view.intrinsics = model.cameras.at(img.camera_id);
  view.out_width = int(view.intrinsics.width);
  view.out_height = int(view.intrinsics.height);
  return view;
}

constexpr double kZNear = 1e-4;

// Continuous pixel coordinates (u, v) of a camera-space point; integer
// coordinates are pixel centers.
inline std::array<double, 2> camera_to_pixel(const colmap::CameraIntrinsics& cam,
                                             const std::array<double, 3>& pc) {
  double xn = pc[0] / pc[2], yn = pc[1] / pc[2];
  if (cam.model == colmap::CameraModel::simple_radial) {
    const double r2 = xn * xn + yn * yn;
    const double f = 1.0 + cam.radial_k() * r2;
    xn *= f;
    yn *= f;
  }
  return {cam.fx() * xn + cam.cx(), cam.fy() * yn + cam.cy()};
}

// Ties at .5 round half-up.
inline int round_half_up(double v) { return int(std::floor(v + 0.5)); }

struct Projection {
  int row = 0, col = 0;
  double depth = 0;  // camera-space z
  std::uint64_t point3d_id = 0;
};

// Every model point with camera-space z > z_near whose projection rounds
// into the output bounds, in point-id order.
inline std::vector<Projection> project_points(const colmap::SparseModel& model,
                                              const ViewSpec& view) {
  std::vector<Projection> out;
  out.reserve(model.points.size());
  for (const auto& [id, pt] : model.points) {
    const auto pc = view.pose.to_camera(pt.xyz);
    if (pc[2] <= kZNear) continue;
    const auto [u, v] = camera_to_pixel(view.intrinsics, pc);
    const int col = round_half_up(u);
    const int row = round_half_up(v);
    if (col < 0 || col >= view.out_width || row < 0 || row >= view.out_height) continue;
    out.push_back({row, col, pc[2], id});
  }
  return out;
}

// Training-time augmentation: rescale so the smaller output dimension hits a
// random target, then take a random crop. Expressed purely through the
// intrinsics, so the augmented map comes from re-projection rather than
// image resampling.
struct AugmentOptions {
  std::array<int, 3> scale_targets = {296, 394, 512};
  int crop = 256;
};

inline ViewSpec augment_view(const ViewSpec& view, std::uint64_t seed,
                             const AugmentOptions& opts = {}) {
  Rng rng(seed);
  const int target = opts.scale_targets[std::size_t(rng.below(opts.scale_targets.size()))];
  require(target >= opts.crop, errc::invalid_config, "scale target below crop size");
  const int smaller = std::min(view.out_width, view.out_height);
  require(smaller > 0, errc::bad_dimensions, "augment_view on empty view");
  const double s = double(target) / double(smaller);
  const int new_w = int(std::lround(view.out_width * s));
  const int new_h = int(std::lround(view.out_height * s));
  const int row_off = int(rng.below(std::uint64_t(new_h - opts.crop + 1)));
  const int col_off = int(rng.below(std::uint64_t(new_w - opts.crop + 1)));

  ViewSpec out = view;
  out.out_width = opts.crop;
  out.out_height = opts.crop;
  out.intrinsics.width = std::uint32_t(opts.crop);
  out.intrinsics.height = std::uint32_t(opts.crop);
  auto& p = out.intrinsics.params;
  switch (out.intrinsics.model) {
    case colmap::CameraModel::simple_pinhole:
    case colmap::CameraModel::simple_radial:
      p[0] *= s;                       // f
      p[1] = p[1] * s - col_off;       // cx
      p[2] = p[2] * s - row_off;       // cy
      break;
    case colmap::CameraModel::pinhole:
      p[0] *= s;
      p[1] *= s;
      p[2] = p[2] * s - col_off;
      p[3] = p[3] * s - row_off;
      break;
  }
  return out;
}

}  // namespace sfminv::render
