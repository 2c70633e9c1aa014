#pragma once

// Checkpoint container: magic, version, entry count, then per entry a name,
// a uint32 shape and float32 data. Round-trips bit-exactly for float nets.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"
#include "sfminv/nn/tensor.hpp"

namespace sfminv::nn {

namespace detail {

constexpr std::uint32_t kCheckpointMagic = 0x53464e43;  // "SFNC"
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  return v;
}

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

inline void save_tensors(const std::string& path, const NamedTensors& entries) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  detail::write_pod(os, detail::kCheckpointMagic);
  detail::write_pod(os, detail::kCheckpointVersion);
  detail::write_pod(os, std::uint64_t(entries.size()));
  for (const auto& [name, t] : entries) {
    detail::write_pod(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    detail::write_pod(os, std::uint32_t(t.shape.size()));
    for (auto d : t.shape) detail::write_pod(os, std::uint32_t(d));
    os.write(reinterpret_cast<const char*>(t.v.data()), std::streamsize(t.v.size() * 4));
  }
  require(bool(os), errc::io_failure, "write failed: " + path);
}

inline std::map<std::string, Tensor<float>> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  require(detail::read_pod<std::uint32_t>(is) == detail::kCheckpointMagic, errc::malformed_record,
          "not a checkpoint file: " + path);
  require(detail::read_pod<std::uint32_t>(is) == detail::kCheckpointVersion,
          errc::malformed_record, "unsupported checkpoint version: " + path);
  const std::uint64_t count = detail::read_pod<std::uint64_t>(is);
  std::map<std::string, Tensor<float>> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::read_pod<std::uint32_t>(is);
    require(bool(is) && name_len < (1u << 16), errc::malformed_record,
            "checkpoint entry name corrupt: " + path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = detail::read_pod<std::uint32_t>(is);
    require(bool(is) && rank <= 8, errc::malformed_record, "checkpoint rank corrupt: " + path);
    Shape shape(rank);
    for (auto& d : shape) d = detail::read_pod<std::uint32_t>(is);
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.v.data()), std::streamsize(t.v.size() * 4));
    require(bool(is), errc::truncated_record, "checkpoint truncated: " + path);
    require(!out.contains(name), errc::malformed_record, "duplicate checkpoint entry " + name);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace sfminv::nn
