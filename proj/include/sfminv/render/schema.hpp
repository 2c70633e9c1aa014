#pragma once

#include <string>

#include "sfminv/core/error.hpp"

namespace sfminv::render {

// Channel layout of a feature map. Order is fixed: depth (1), color (3),
// sift (128), scale (1), orientation (2). Scale/orientation exist only for
// single-image keypoint maps.
struct ChannelSchema {
  bool depth = false;
  bool color = false;
  bool sift = false;
  bool scale = false;
  bool orientation = false;

  int channels() const {
    return (depth ? 1 : 0) + (color ? 3 : 0) + (sift ? 128 : 0) + (scale ? 1 : 0) +
           (orientation ? 2 : 0);
  }

  int depth_offset() const { return depth ? 0 : -1; }
  int color_offset() const { return color ? (depth ? 1 : 0) : -1; }
  int sift_offset() const {
    return sift ? (depth ? 1 : 0) + (color ? 3 : 0) : -1;
  }
  int scale_offset() const {
    return scale ? (depth ? 1 : 0) + (color ? 3 : 0) + (sift ? 128 : 0) : -1;
  }
  int orientation_offset() const {
    return orientation ? (depth ? 1 : 0) + (color ? 3 : 0) + (sift ? 128 : 0) + (scale ? 1 : 0)
                       : -1;
  }

  // Flag string, e.g. "z,c,d" for depth+color+sift, "d,s,o" for keypoint maps.
  static ChannelSchema parse(const std::string& flags) {
    ChannelSchema s;
    std::size_t pos = 0;
    while (pos < flags.size()) {
      std::size_t end = flags.find(',', pos);
      if (end == std::string::npos) end = flags.size();
      const std::string tok = flags.substr(pos, end - pos);
      if (tok == "z") s.depth = true;
      else if (tok == "c") s.color = true;
      else if (tok == "d") s.sift = true;
      else if (tok == "s") s.scale = true;
      else if (tok == "o") s.orientation = true;
      else if (!tok.empty()) fail(errc::invalid_config, "unknown schema flag '" + tok + "'");
      pos = end + 1;
    }
    require(s.channels() >= 1, errc::invalid_config, "schema selects no channels");
    return s;
  }

  std::string str() const {
    std::string out;
    auto app = [&out](const char* t) {
      if (!out.empty()) out += ',';
      out += t;
    };
    if (depth) app("z");
    if (color) app("c");
    if (sift) app("d");
    if (scale) app("s");
    if (orientation) app("o");
    return out;
  }

  bool operator==(const ChannelSchema&) const = default;
};

}  // namespace sfminv::render
