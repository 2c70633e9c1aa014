#pragma once

// Float image in [0,1], row-major HWC. The 8-bit boundary quantizes with
// round(v * 255), which is also the PNG output contract.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"
#include "sfminv/core/png.hpp"

namespace sfminv {

struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // h * w * c

  Image() = default;
  Image(int h, int w, int c, float fill = 0.f)
      : height(h), width(w), channels(c), data(std::size_t(h) * w * c, fill) {}

  float& at(int h, int w, int c) { return data[(std::size_t(h) * width + w) * channels + c]; }
  float at(int h, int w, int c) const { return data[(std::size_t(h) * width + w) * channels + c]; }
  std::size_t size() const { return data.size(); }
};

inline png::PixelBuffer to_u8(const Image& img) {
  png::PixelBuffer buf;
  buf.width = img.width;
  buf.height = img.height;
  buf.channels = img.channels;
  buf.pixels.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    float v = std::clamp(img.data[i], 0.f, 1.f);
    buf.pixels[i] = std::uint8_t(std::lround(v * 255.f));
  }
  return buf;
}

inline Image from_u8(const png::PixelBuffer& buf) {
  Image img(buf.height, buf.width, buf.channels);
  for (std::size_t i = 0; i < buf.pixels.size(); ++i) img.data[i] = buf.pixels[i] / 255.f;
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  png::write_file(path, to_u8(img));
}

inline Image read_png(const std::string& path) { return from_u8(png::read_file(path)); }

// Bilinear resampling, used to bring stored source photos in line with an
// augmented view. Rendered (synthetic) targets never go through this.
inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, errc::bad_dimensions, "resize to empty image");
  Image dst(out_h, out_w, src.channels);
  const double sy = double(src.height) / out_h;
  const double sx = double(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = int(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, src.height - 1);
    int y1c = std::clamp(y0 + 1, 0, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = int(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, src.width - 1);
      int x1c = std::clamp(x0 + 1, 0, src.width - 1);
      for (int c = 0; c < src.channels; ++c) {
        double top = src.at(y0c, x0c, c) * (1 - wx) + src.at(y0c, x1c, c) * wx;
        double bot = src.at(y1c, x0c, c) * (1 - wx) + src.at(y1c, x1c, c) * wx;
        dst.at(y, x, c) = float(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

inline Image crop(const Image& src, int row0, int col0, int h, int w) {
  require(row0 >= 0 && col0 >= 0 && row0 + h <= src.height && col0 + w <= src.width,
          errc::bad_dimensions, "crop outside image");
  Image dst(h, w, src.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < src.channels; ++c) dst.at(y, x, c) = src.at(row0 + y, col0 + x, c);
  return dst;
}

}  // namespace sfminv
