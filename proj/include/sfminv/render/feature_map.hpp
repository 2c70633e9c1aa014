#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"
#include "sfminv/nn/tensor.hpp"
#include "sfminv/render/schema.hpp"

namespace sfminv::render {

// Viewpoint feature map: per-pixel attribute vector where a 3D point landed,
// zeros elsewhere. Channel data is the network-ready encoding; raw metric
// depth is kept separately for visibility logic.
struct FeatureMap {
  int height = 0, width = 0;
  ChannelSchema schema;
  std::vector<float> data;           // height * width * channels(), pixel-major
  std::vector<std::uint8_t> occupancy;  // height * width
  std::vector<double> raw_depth;        // metric depth, 0 where unoccupied
  std::vector<std::uint64_t> point_ids; // kNoPoint where unoccupied
  int occupied_count = 0;               // M

  static constexpr std::uint64_t kNoPoint = ~std::uint64_t(0);

  FeatureMap() = default;
  FeatureMap(int h, int w, ChannelSchema s)
      : height(h),
        width(w),
        schema(s),
        data(std::size_t(h) * w * s.channels(), 0.f),
        occupancy(std::size_t(h) * w, 0),
        raw_depth(std::size_t(h) * w, 0.0),
        point_ids(std::size_t(h) * w, kNoPoint) {}

  std::size_t cell(int r, int c) const { return std::size_t(r) * width + c; }
  float* px(int r, int c) { return data.data() + cell(r, c) * std::size_t(schema.channels()); }
  const float* px(int r, int c) const {
    return data.data() + cell(r, c) * std::size_t(schema.channels());
  }
  bool occupied(int r, int c) const { return occupancy[cell(r, c)] != 0; }

  void clear_cell(std::size_t idx) {
    if (occupancy[idx]) --occupied_count;
    occupancy[idx] = 0;
    raw_depth[idx] = 0.0;
    point_ids[idx] = kNoPoint;
    float* p = data.data() + idx * std::size_t(schema.channels());
    std::fill(p, p + schema.channels(), 0.f);
  }

  // data[r,c,:] == 0 wherever unoccupied, M consistent with occupancy.
  void check_invariants() const {
    int m = 0;
    const int n = schema.channels();
    for (std::size_t i = 0; i < occupancy.size(); ++i) {
      if (occupancy[i]) {
        ++m;
        require(raw_depth[i] > 0, errc::shape_mismatch, "occupied cell without depth");
      } else {
        for (int c = 0; c < n; ++c)
          require(data[i * std::size_t(n) + c] == 0.f, errc::shape_mismatch,
                  "unoccupied cell carries data");
        require(raw_depth[i] == 0.0 && point_ids[i] == kNoPoint, errc::shape_mismatch,
                "unoccupied cell carries depth or id");
      }
    }
    require(m == occupied_count, errc::shape_mismatch, "occupied_count out of sync");
  }
};

// NCHW tensor view of the channel data for the networks.
inline nn::Tensor<float> to_tensor(const FeatureMap& map) {
  const int n = map.schema.channels();
  nn::Tensor<float> t({1, n, map.height, map.width});
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      const float* p = map.px(r, c);
      for (int ch = 0; ch < n; ++ch) t.at(0, ch, r, c) = p[ch];
    }
  return t;
}

// Flat binary dump for debugging: uint32 H, W, n, M then float32 data rows.
inline void write_dump(const std::string& path, const FeatureMap& map) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  const std::uint32_t header[4] = {std::uint32_t(map.height), std::uint32_t(map.width),
                                   std::uint32_t(map.schema.channels()),
                                   std::uint32_t(map.occupied_count)};
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  os.write(reinterpret_cast<const char*>(map.data.data()),
           std::streamsize(map.data.size() * sizeof(float)));
  require(bool(os), errc::io_failure, "write failed: " + path);
}

struct DumpHeader {
  std::uint32_t height, width, channels, occupied;
};

inline DumpHeader read_dump_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  DumpHeader h{};
  is.read(reinterpret_cast<char*>(&h), sizeof(h));
  require(bool(is), errc::truncated_record, "dump header truncated: " + path);
  return h;
}

}  // namespace sfminv::render
