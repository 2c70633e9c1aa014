#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"

namespace sfminv::colmap {

// COLMAP model ids: SIMPLE_PINHOLE=0, PINHOLE=1, SIMPLE_RADIAL=2. Everything
// else is rejected at parse time.
enum class CameraModel : int { simple_pinhole = 0, pinhole = 1, simple_radial = 2 };

inline int camera_model_param_count(CameraModel m) {
  switch (m) {
    case CameraModel::simple_pinhole: return 3;  // f, cx, cy
    case CameraModel::pinhole: return 4;         // fx, fy, cx, cy
    case CameraModel::simple_radial: return 4;   // f, cx, cy, k
  }
  return -1;
}

inline const char* camera_model_name(CameraModel m) {
  switch (m) {
    case CameraModel::simple_pinhole: return "SIMPLE_PINHOLE";
    case CameraModel::pinhole: return "PINHOLE";
    case CameraModel::simple_radial: return "SIMPLE_RADIAL";
  }
  return "?";
}

struct CameraIntrinsics {
  std::uint32_t camera_id = 0;
  CameraModel model = CameraModel::pinhole;
  std::uint32_t width = 0, height = 0;
  std::vector<double> params;

  double fx() const { return params[0]; }
  double fy() const { return model == CameraModel::pinhole ? params[1] : params[0]; }
  double cx() const { return model == CameraModel::pinhole ? params[2] : params[1]; }
  double cy() const { return model == CameraModel::pinhole ? params[3] : params[2]; }
  double radial_k() const { return model == CameraModel::simple_radial ? params[3] : 0.0; }

  void validate() const {
    require(width > 0 && height > 0, errc::malformed_record,
            "camera " + std::to_string(camera_id) + ": empty image size");
    require(int(params.size()) == camera_model_param_count(model), errc::malformed_record,
            "camera " + std::to_string(camera_id) + ": parameter count for " +
                camera_model_name(model));
    require(fx() > 0 && fy() > 0, errc::malformed_record,
            "camera " + std::to_string(camera_id) + ": focal length must be positive");
    require(cx() >= 0 && cx() < width && cy() >= 0 && cy() < height, errc::malformed_record,
            "camera " + std::to_string(camera_id) + ": principal point outside image");
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

struct Observation {
  double x = 0, y = 0;
  std::uint64_t point3d_id = kNoPoint;

  static constexpr std::uint64_t kNoPoint = ~std::uint64_t(0);
  bool has_point() const { return point3d_id != kNoPoint; }
  bool operator==(const Observation&) const = default;
};

struct ImagePose {
  std::uint32_t image_id = 0;
  std::array<double, 4> rotation = {1, 0, 0, 0};  // unit quaternion (w,x,y,z), world -> camera
  std::array<double, 3> translation = {0, 0, 0};
  std::uint32_t camera_id = 0;
  std::string name;
  std::vector<Observation> observations;

  double quat_norm() const {
    return std::sqrt(rotation[0] * rotation[0] + rotation[1] * rotation[1] +
                     rotation[2] * rotation[2] + rotation[3] * rotation[3]);
  }

  void normalize_rotation() {
    const double n = quat_norm();
    require(n > 0, errc::malformed_record,
            "image " + std::to_string(image_id) + ": zero quaternion");
    for (auto& q : rotation) q /= n;
  }

  // Normalizes only when outside tolerance, so already-unit quaternions
  // (e.g. from our own writer) survive a parse round-trip bit-for-bit.
  void ensure_unit_rotation() {
    const double n = quat_norm();
    require(n > 0 && std::isfinite(n), errc::malformed_record,
            "image " + std::to_string(image_id) + ": degenerate quaternion");
    if (std::abs(n - 1.0) > 1e-9) normalize_rotation();
  }

  bool operator==(const ImagePose&) const = default;
};

struct Point3D {
  std::uint64_t point3d_id = 0;
  std::array<double, 3> xyz = {0, 0, 0};
  std::array<std::uint8_t, 3> rgb = {0, 0, 0};
  double reprojection_error = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> track;  // (image_id, point2d_idx)
  std::optional<std::array<std::uint8_t, 128>> descriptor;

  bool operator==(const Point3D&) const = default;
};

struct SparseModel {
  std::map<std::uint32_t, CameraIntrinsics> cameras;
  std::map<std::uint32_t, ImagePose> images;
  std::map<std::uint64_t, Point3D> points;

  // Referential integrity across the three maps plus per-record invariants.
  void validate() const {
    for (const auto& [id, cam] : cameras) {
      require(id == cam.camera_id, errc::malformed_record, "camera map key/id mismatch");
      cam.validate();
    }
    for (const auto& [id, img] : images) {
      require(id == img.image_id, errc::malformed_record, "image map key/id mismatch");
      require(std::abs(img.quat_norm() - 1.0) <= 1e-9, errc::malformed_record,
              "image " + std::to_string(id) + ": quaternion not normalized");
      require(cameras.contains(img.camera_id), errc::dangling_reference,
              "image " + std::to_string(id) + " references camera " +
                  std::to_string(img.camera_id));
      for (const auto& obs : img.observations)
        if (obs.has_point())
          require(points.contains(obs.point3d_id), errc::dangling_reference,
                  "image " + std::to_string(id) + " observes missing point " +
                      std::to_string(obs.point3d_id));
    }
    for (const auto& [id, pt] : points) {
      require(id == pt.point3d_id, errc::malformed_record, "point map key/id mismatch");
      for (const auto& [image_id, point2d_idx] : pt.track) {
        auto it = images.find(image_id);
        require(it != images.end(), errc::dangling_reference,
                "point " + std::to_string(id) + " tracks missing image " +
                    std::to_string(image_id));
        require(point2d_idx < it->second.observations.size(), errc::dangling_reference,
                "point " + std::to_string(id) + " tracks observation " +
                    std::to_string(point2d_idx) + " out of range in image " +
                    std::to_string(image_id));
      }
    }
  }

  std::size_t descriptor_count() const {
    std::size_t n = 0;
    for (const auto& [id, pt] : points) n += pt.descriptor.has_value();
    return n;
  }

  bool operator==(const SparseModel&) const = default;
};

}  // namespace sfminv::colmap
