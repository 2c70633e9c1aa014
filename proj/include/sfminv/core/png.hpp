#pragma once

// Minimal PNG codec on top of zlib. Writes 8-bit gray/RGB images and reads
// any non-interlaced 8-bit gray/RGB/RGBA PNG (all five scanline filters).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "sfminv/core/error.hpp"

namespace sfminv::png {

struct PixelBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = gray, 3 = RGB
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

namespace detail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void write_chunk(std::vector<std::uint8_t>& out, const char type[4],
                        const std::uint8_t* data, std::size_t len) {
  put_u32be(out, std::uint32_t(len));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  std::uint32_t crc = ::crc32(0, out.data() + start, uInt(4 + len));
  put_u32be(out, crc);
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const PixelBuffer& img) {
  require(img.channels == 1 || img.channels == 3, errc::io_failure,
          "png encoder supports 1 or 3 channels");
  require(img.width > 0 && img.height > 0 &&
              img.pixels.size() == std::size_t(img.width) * img.height * img.channels,
          errc::io_failure, "png encoder: inconsistent buffer size");

  const std::size_t stride = std::size_t(img.width) * img.channels;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter type 0 on every row
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.pixels.data() + y * stride, stride);
  }

  uLongf zlen = ::compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> zdata(zlen);
  if (::compress2(zdata.data(), &zlen, raw.data(), uLong(raw.size()), 6) != Z_OK)
    fail(errc::io_failure, "png encoder: deflate failed");
  zdata.resize(zlen);

  std::vector<std::uint8_t> out;
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);

  std::uint8_t ihdr[13];
  ihdr[0] = std::uint8_t(img.width >> 24);
  ihdr[1] = std::uint8_t(img.width >> 16);
  ihdr[2] = std::uint8_t(img.width >> 8);
  ihdr[3] = std::uint8_t(img.width);
  ihdr[4] = std::uint8_t(img.height >> 24);
  ihdr[5] = std::uint8_t(img.height >> 16);
  ihdr[6] = std::uint8_t(img.height >> 8);
  ihdr[7] = std::uint8_t(img.height);
  ihdr[8] = 8;                                  // bit depth
  ihdr[9] = img.channels == 1 ? 0 : 2;          // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;           // compression, filter, interlace
  detail::write_chunk(out, "IHDR", ihdr, 13);
  detail::write_chunk(out, "IDAT", zdata.data(), zdata.size());
  detail::write_chunk(out, "IEND", nullptr, 0);
  return out;
}

inline PixelBuffer decode(const std::uint8_t* bytes, std::size_t size) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  require(size >= 8 && std::memcmp(bytes, sig, 8) == 0, errc::io_failure, "not a png file");

  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> zdata;
  std::size_t pos = 8;
  bool have_ihdr = false, have_iend = false;
  while (pos + 12 <= size && !have_iend) {
    std::uint32_t len = detail::get_u32be(bytes + pos);
    require(pos + 12 + len <= size, errc::io_failure, "png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes + pos + 4);
    const std::uint8_t* data = bytes + pos + 8;
    if (!std::memcmp(type, "IHDR", 4)) {
      require(len == 13, errc::io_failure, "png: bad IHDR");
      width = int(detail::get_u32be(data));
      height = int(detail::get_u32be(data + 4));
      int bit_depth = data[8], color_type = data[9], interlace = data[12];
      require(bit_depth == 8, errc::io_failure, "png: only 8-bit supported");
      require(interlace == 0, errc::io_failure, "png: interlaced not supported");
      switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: fail(errc::io_failure, "png: unsupported color type");
      }
      have_ihdr = true;
    } else if (!std::memcmp(type, "IDAT", 4)) {
      zdata.insert(zdata.end(), data, data + len);
    } else if (!std::memcmp(type, "IEND", 4)) {
      have_iend = true;
    }
    pos += 12 + len;
  }
  require(have_ihdr && have_iend && width > 0 && height > 0, errc::io_failure,
          "png: missing chunks");

  const std::size_t stride = std::size_t(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf rawlen = uLongf(raw.size());
  int zret = ::uncompress(raw.data(), &rawlen, zdata.data(), uLong(zdata.size()));
  require(zret == Z_OK && rawlen == raw.size(), errc::io_failure, "png: inflate failed");

  PixelBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.pixels.resize(stride * height);
  const int bpp = channels;  // bytes per pixel at depth 8
  std::vector<std::uint8_t> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = img.pixels.data() + y * stride;
    for (std::size_t x = 0; x < stride; ++x) {
      int a = x >= std::size_t(bpp) ? dst[x - bpp] : 0;  // left
      int b = prev[x];                                   // up
      int c = x >= std::size_t(bpp) ? prev[x - bpp] : 0; // up-left
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: fail(errc::io_failure, "png: bad filter type");
      }
      dst[x] = std::uint8_t(v);
    }
    std::memcpy(prev.data(), dst, stride);
  }

  // Drop an alpha channel if present; nothing downstream uses it.
  if (channels == 4) {
    PixelBuffer rgb;
    rgb.width = width;
    rgb.height = height;
    rgb.channels = 3;
    rgb.pixels.resize(std::size_t(width) * height * 3);
    for (std::size_t i = 0; i < std::size_t(width) * height; ++i) {
      rgb.pixels[i * 3 + 0] = img.pixels[i * 4 + 0];
      rgb.pixels[i * 3 + 1] = img.pixels[i * 4 + 1];
      rgb.pixels[i * 3 + 2] = img.pixels[i * 4 + 2];
    }
    return rgb;
  }
  return img;
}

inline void write_file(const std::string& path, const PixelBuffer& img) {
  auto bytes = encode(img);
  std::ofstream f(path, std::ios::binary);
  require(bool(f), errc::io_failure, "cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require(bool(f), errc::io_failure, "write failed: " + path);
}

inline PixelBuffer read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  require(bool(f), errc::missing_file, "cannot open: " + path);
  const auto size = std::streamsize(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  require(bool(f), errc::io_failure, "read failed: " + path);
  return decode(bytes.data(), bytes.size());
}

}  // namespace sfminv::png
