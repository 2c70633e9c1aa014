#pragma once

#include <charconv>
#include <fstream>
#include <limits>
#include <vector>

#include "sfminv/core/rng.hpp"
#include "sfminv/render/feature_map.hpp"
#include "sfminv/render/view.hpp"

namespace sfminv::render {

// Channel encodings for network input. Raw metric depth is normalized per
// map; color is matched to the generators' tanh range; descriptors land in
// [0,1]. The paper leaves these encodings open, values are pinned here.
constexpr double kDepthNormEps = 1e-8;

inline float encode_color(std::uint8_t byte) { return float(byte / 127.5 - 1.0); }
inline float encode_sift(std::uint8_t byte) { return float(byte) / 255.f; }

// Nearest-point z-buffering: when several projections share a pixel the one
// closest to the camera wins (earlier projection wins exact depth ties).
inline FeatureMap rasterize(const std::vector<Projection>& projections,
                            const colmap::SparseModel& model, const ViewSpec& view,
                            const ChannelSchema& schema) {
  require(!schema.scale && !schema.orientation, errc::invalid_config,
          "scale/orientation channels require keypoint input");
  FeatureMap map(view.out_height, view.out_width, schema);

  for (const auto& pr : projections) {
    const std::size_t idx = map.cell(pr.row, pr.col);
    if (map.occupancy[idx] && map.raw_depth[idx] <= pr.depth) continue;
    if (!map.occupancy[idx]) ++map.occupied_count;
    map.occupancy[idx] = 1;
    map.raw_depth[idx] = pr.depth;
    map.point_ids[idx] = pr.point3d_id;
  }

  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.occupancy.size(); ++i)
    if (map.occupancy[i]) {
      d_min = std::min(d_min, map.raw_depth[i]);
      d_max = std::max(d_max, map.raw_depth[i]);
    }

  const int n = schema.channels();
  for (std::size_t i = 0; i < map.occupancy.size(); ++i) {
    if (!map.occupancy[i]) continue;
    const auto& pt = model.points.at(map.point_ids[i]);
    float* px = map.data.data() + i * std::size_t(n);
    if (schema.depth)
      px[schema.depth_offset()] = float((map.raw_depth[i] - d_min) / (d_max - d_min + kDepthNormEps));
    if (schema.color) {
      const int off = schema.color_offset();
      for (int c = 0; c < 3; ++c) px[off + c] = encode_color(pt.rgb[std::size_t(c)]);
    }
    if (schema.sift) {
      require(pt.descriptor.has_value(), errc::missing_attribute,
              "schema requires sift but point " + std::to_string(pt.point3d_id) +
                  " has no descriptor");
      const int off = schema.sift_offset();
      for (int c = 0; c < 128; ++c) px[off + c] = encode_sift((*pt.descriptor)[std::size_t(c)]);
    }
  }
  return map;
}

inline FeatureMap render_view(const colmap::SparseModel& model, const ViewSpec& view,
                              const ChannelSchema& schema) {
  return rasterize(project_points(model, view), model, view, schema);
}

// Sparsity simulation: keep exactly round(keep_ratio * M) occupied cells,
// chosen uniformly without replacement; dropped cells are zeroed in every
// field. Survivors keep their channel data bit-for-bit.
inline FeatureMap apply_dropout(const FeatureMap& map, double keep_ratio, std::uint64_t seed) {
  require(keep_ratio > 0.0 && keep_ratio <= 1.0, errc::invalid_config,
          "keep_ratio must lie in (0, 1]");
  FeatureMap out = map;
  if (keep_ratio == 1.0 || map.occupied_count == 0) return out;

  std::vector<std::size_t> occupied;
  occupied.reserve(std::size_t(map.occupied_count));
  for (std::size_t i = 0; i < map.occupancy.size(); ++i)
    if (map.occupancy[i]) occupied.push_back(i);

  const auto keep = std::uint64_t(std::llround(keep_ratio * double(map.occupied_count)));
  Rng rng(seed);
  auto kept = rng.sample_without_replacement(occupied.size(), keep);
  std::vector<std::uint8_t> keep_flag(occupied.size(), 0);
  for (auto k : kept) keep_flag[std::size_t(k)] = 1;
  for (std::size_t j = 0; j < occupied.size(); ++j)
    if (!keep_flag[j]) out.clear_cell(occupied[j]);
  return out;
}

// ---------------------------------------------------------------------------
// single-image keypoint maps

struct Keypoint {
  double x = 0, y = 0;
  double scale = 1;
  double orientation = 0;  // radians
  std::array<std::uint8_t, 128> descriptor{};
};

struct KeypointSet {
  std::vector<Keypoint> keypoints;
  int width = 0, height = 0;
};

// One occupied cell per keypoint (nearest-pixel rounding, the later keypoint
// in the list wins collisions). No depth is available in this mode; the raw
// depth of occupied cells is fixed at 1 to keep the map invariants intact.
inline FeatureMap featuremap_from_keypoints(const KeypointSet& kps, const ChannelSchema& schema) {
  require(!schema.depth && !schema.color, errc::invalid_config,
          "keypoint maps support sift/scale/orientation channels only");
  require(!kps.keypoints.empty(), errc::empty_keypoint_set, "no keypoints");
  require(kps.width > 0 && kps.height > 0, errc::bad_dimensions, "keypoint set without dims");
  FeatureMap map(kps.height, kps.width, schema);
  const int n = schema.channels();
  for (const auto& kp : kps.keypoints) {
    require(kp.x >= 0 && kp.x < kps.width && kp.y >= 0 && kp.y < kps.height,
            errc::malformed_record, "keypoint outside image bounds");
    const int col = std::min(round_half_up(kp.x), kps.width - 1);
    const int row = std::min(round_half_up(kp.y), kps.height - 1);
    const std::size_t idx = map.cell(row, col);
    if (!map.occupancy[idx]) ++map.occupied_count;
    map.occupancy[idx] = 1;
    map.raw_depth[idx] = 1.0;
    float* px = map.data.data() + idx * std::size_t(n);
    if (schema.sift) {
      const int off = schema.sift_offset();
      for (int c = 0; c < 128; ++c) px[off + c] = encode_sift(kp.descriptor[std::size_t(c)]);
    }
    if (schema.scale) {
      require(kp.scale > 0, errc::malformed_record, "keypoint scale must be positive");
      px[schema.scale_offset()] = float(std::log2(kp.scale));
    }
    if (schema.orientation) {
      const int off = schema.orientation_offset();
      px[off] = float(std::sin(kp.orientation));
      px[off + 1] = float(std::cos(kp.orientation));
    }
  }
  return map;
}

// Keypoint file: one keypoint per line, `x y scale orientation d0..d127`.
inline KeypointSet load_keypoints(const std::string& path, int width, int height) {
  std::ifstream is(path);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  KeypointSet set;
  set.width = width;
  set.height = height;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    Keypoint kp;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto real = [&](double& out) {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
      auto [np, ec] = std::from_chars(p, end, out);
      require(ec == std::errc(), errc::malformed_record,
              path + ":" + std::to_string(lineno) + ": bad number");
      p = np;
    };
    real(kp.x);
    real(kp.y);
    real(kp.scale);
    real(kp.orientation);
    for (auto& b : kp.descriptor) {
      double v;
      real(v);
      require(v >= 0 && v <= 255, errc::malformed_record,
              path + ":" + std::to_string(lineno) + ": descriptor byte out of range");
      b = std::uint8_t(std::lround(v));
    }
    set.keypoints.push_back(kp);
  }
  return set;
}

}  // namespace sfminv::render
