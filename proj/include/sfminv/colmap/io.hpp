#pragma once

// Readers/writers for COLMAP sparse models (cameras/images/points3D in .txt
// or .bin) plus the flat descriptor sidecar (descriptors.bin, 136 bytes per
// record). Text reals are written with shortest round-trip formatting, so
// parse(write(m)) reproduces every field bit-for-bit in both formats.

#include <array>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sfminv/colmap/model.hpp"
#include "sfminv/core/error.hpp"

namespace sfminv::colmap {

enum class ModelFormat { text, binary, auto_detect };

using DescriptorMap = std::map<std::uint64_t, std::array<std::uint8_t, 128>>;

namespace detail {

// --- text helpers -----------------------------------------------------------

class Tokens {
 public:
  Tokens(const std::string& line, const std::string& file, std::size_t lineno)
      : line_(line), file_(file), lineno_(lineno) {}

  bool done() {
    skip_ws();
    return pos_ >= line_.size();
  }

  std::string_view next() {
    skip_ws();
    require(pos_ < line_.size(), errc::malformed_record, where() + "unexpected end of line");
    std::size_t start = pos_;
    while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
    return std::string_view(line_).substr(start, pos_ - start);
  }

  // Remainder of the line, trimmed; used for image names.
  std::string rest() {
    skip_ws();
    std::size_t end = line_.size();
    while (end > pos_ && std::isspace(static_cast<unsigned char>(line_[end - 1]))) --end;
    std::string out = line_.substr(pos_, end - pos_);
    pos_ = line_.size();
    return out;
  }

  template <typename V>
  V number() {
    auto tok = next();
    V value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    require(ec == std::errc() && ptr == tok.data() + tok.size(), errc::malformed_record,
            where() + "bad number '" + std::string(tok) + "'");
    return value;
  }

  double real() {
    auto tok = next();
    double value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    require(ec == std::errc() && ptr == tok.data() + tok.size(), errc::malformed_record,
            where() + "bad real '" + std::string(tok) + "'");
    return value;
  }

  std::string where() const { return file_ + ":" + std::to_string(lineno_) + ": "; }

 private:
  void skip_ws() {
    while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
  }
  const std::string& line_;
  std::string file_;
  std::size_t lineno_;
  std::size_t pos_ = 0;
};

// Reads lines, skipping comments and blank lines unless asked not to.
class LineReader {
 public:
  LineReader(const std::string& path) : path_(path), is_(path) {
    require(bool(is_), errc::missing_file, "cannot open: " + path);
  }

  // Next content line; false at EOF. Blank/comment lines are skipped.
  bool next(std::string& line) {
    while (std::getline(is_, line)) {
      ++lineno_;
      std::size_t i = 0;
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i == line.size() || line[i] == '#') continue;
      return true;
    }
    return false;
  }

  // Next raw line (may be blank), used for observation rows; false at EOF.
  bool next_raw(std::string& line) {
    if (!std::getline(is_, line)) return false;
    ++lineno_;
    return true;
  }

  Tokens tokens(const std::string& line) const { return Tokens(line, path_, lineno_); }
  std::string where() const { return path_ + ":" + std::to_string(lineno_) + ": "; }

 private:
  std::string path_;
  std::ifstream is_;
  std::size_t lineno_ = 0;
};

inline std::string format_real(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// --- binary helpers ---------------------------------------------------------

class BinReader {
 public:
  explicit BinReader(const std::string& path) : path_(path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    require(bool(is), errc::missing_file, "cannot open: " + path);
    const auto size = std::streamsize(is.tellg());
    is.seekg(0);
    buf_.resize(std::size_t(size));
    is.read(reinterpret_cast<char*>(buf_.data()), size);
    require(bool(is), errc::io_failure, "read failed: " + path);
  }

  template <typename V>
  V pod() {
    require(pos_ + sizeof(V) <= buf_.size(), errc::malformed_record,
            where() + "truncated record");
    V v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  std::string cstring() {
    std::string s;
    while (pos_ < buf_.size() && buf_[pos_] != 0) s.push_back(char(buf_[pos_++]));
    require(pos_ < buf_.size(), errc::malformed_record, where() + "unterminated string");
    ++pos_;  // consume NUL
    return s;
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

  void expect_eof() const {
    require(pos_ == buf_.size(), errc::malformed_record,
            where() + std::to_string(buf_.size() - pos_) + " trailing bytes after last record");
  }

  std::string where() const { return path_ + " @" + std::to_string(pos_) + ": "; }

 private:
  std::string path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : path_(path), os_(path, std::ios::binary) {
    require(bool(os_), errc::io_failure, "cannot open for writing: " + path);
  }

  template <typename V>
  void pod(const V& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }

  void cstring(const std::string& s) {
    os_.write(s.data(), std::streamsize(s.size()));
    os_.put('\0');
  }

  void close() {
    os_.close();
    require(bool(os_), errc::io_failure, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream os_;
};

inline CameraModel camera_model_from_id(int id, const std::string& where) {
  require(id >= 0 && id <= 2, errc::unsupported_camera_model,
          where + "camera model id " + std::to_string(id));
  return CameraModel(id);
}

inline CameraModel camera_model_from_name(std::string_view name, const std::string& where) {
  for (int id = 0; id <= 2; ++id)
    if (name == camera_model_name(CameraModel(id))) return CameraModel(id);
  fail(errc::unsupported_camera_model, where + "camera model '" + std::string(name) + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// text format

inline void parse_cameras_text(const std::string& path, SparseModel& model) {
  detail::LineReader lr(path);
  std::string line;
  while (lr.next(line)) {
    auto t = lr.tokens(line);
    CameraIntrinsics cam;
    cam.camera_id = t.number<std::uint32_t>();
    cam.model = detail::camera_model_from_name(t.next(), t.where());
    cam.width = t.number<std::uint32_t>();
    cam.height = t.number<std::uint32_t>();
    const int np = camera_model_param_count(cam.model);
    for (int i = 0; i < np; ++i) cam.params.push_back(t.real());
    require(t.done(), errc::malformed_record, t.where() + "trailing tokens on camera line");
    require(!model.cameras.contains(cam.camera_id), errc::malformed_record,
            t.where() + "duplicate camera id " + std::to_string(cam.camera_id));
    model.cameras.emplace(cam.camera_id, std::move(cam));
  }
}

inline void parse_images_text(const std::string& path, SparseModel& model) {
  detail::LineReader lr(path);
  std::string line;
  while (lr.next(line)) {
    auto t = lr.tokens(line);
    ImagePose img;
    img.image_id = t.number<std::uint32_t>();
    for (auto& q : img.rotation) q = t.real();
    for (auto& v : img.translation) v = t.real();
    img.camera_id = t.number<std::uint32_t>();
    img.name = t.rest();
    img.ensure_unit_rotation();

    std::string obs_line;
    require(lr.next_raw(obs_line), errc::malformed_record,
            lr.where() + "missing observation line for image " + std::to_string(img.image_id));
    auto ot = lr.tokens(obs_line);
    while (!ot.done()) {
      Observation obs;
      obs.x = ot.real();
      obs.y = ot.real();
      const auto id = ot.number<std::int64_t>();
      obs.point3d_id = id < 0 ? Observation::kNoPoint : std::uint64_t(id);
      img.observations.push_back(obs);
    }
    require(!model.images.contains(img.image_id), errc::malformed_record,
            t.where() + "duplicate image id " + std::to_string(img.image_id));
    model.images.emplace(img.image_id, std::move(img));
  }
}

inline void parse_points_text(const std::string& path, SparseModel& model) {
  detail::LineReader lr(path);
  std::string line;
  while (lr.next(line)) {
    auto t = lr.tokens(line);
    Point3D pt;
    pt.point3d_id = t.number<std::uint64_t>();
    for (auto& v : pt.xyz) v = t.real();
    for (auto& v : pt.rgb) {
      const auto c = t.number<std::int32_t>();
      require(c >= 0 && c <= 255, errc::malformed_record, t.where() + "color out of range");
      v = std::uint8_t(c);
    }
    pt.reprojection_error = t.real();
    while (!t.done()) {
      const auto image_id = t.number<std::uint32_t>();
      const auto p2d = t.number<std::uint32_t>();
      pt.track.emplace_back(image_id, p2d);
    }
    require(!model.points.contains(pt.point3d_id), errc::malformed_record,
            t.where() + "duplicate point id " + std::to_string(pt.point3d_id));
    model.points.emplace(pt.point3d_id, std::move(pt));
  }
}

inline void write_cameras_text(const std::string& path, const SparseModel& model) {
  std::ofstream os(path);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  os << "# Camera list: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n";
  for (const auto& [id, cam] : model.cameras) {
    os << id << ' ' << camera_model_name(cam.model) << ' ' << cam.width << ' ' << cam.height;
    for (double p : cam.params) os << ' ' << detail::format_real(p);
    os << '\n';
  }
  require(bool(os), errc::io_failure, "write failed: " + path);
}

inline void write_images_text(const std::string& path, const SparseModel& model) {
  std::ofstream os(path);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  os << "# Image list: IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n";
  os << "#             X Y POINT3D_ID (one observation triplet per point)\n";
  for (const auto& [id, img] : model.images) {
    os << id;
    for (double q : img.rotation) os << ' ' << detail::format_real(q);
    for (double v : img.translation) os << ' ' << detail::format_real(v);
    os << ' ' << img.camera_id << ' ' << img.name << '\n';
    bool first = true;
    for (const auto& obs : img.observations) {
      if (!first) os << ' ';
      first = false;
      os << detail::format_real(obs.x) << ' ' << detail::format_real(obs.y) << ' ';
      if (obs.has_point())
        os << obs.point3d_id;
      else
        os << -1;
    }
    os << '\n';
  }
  require(bool(os), errc::io_failure, "write failed: " + path);
}

inline void write_points_text(const std::string& path, const SparseModel& model) {
  std::ofstream os(path);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  os << "# 3D point list: POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID POINT2D_IDX)\n";
  for (const auto& [id, pt] : model.points) {
    os << id;
    for (double v : pt.xyz) os << ' ' << detail::format_real(v);
    for (auto c : pt.rgb) os << ' ' << int(c);
    os << ' ' << detail::format_real(pt.reprojection_error);
    for (const auto& [image_id, p2d] : pt.track) os << ' ' << image_id << ' ' << p2d;
    os << '\n';
  }
  require(bool(os), errc::io_failure, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// binary format (COLMAP layout, little-endian)

inline void parse_cameras_binary(const std::string& path, SparseModel& model) {
  detail::BinReader r(path);
  const auto count = r.pod<std::uint64_t>();
  require(count <= r.remaining() / 40, errc::malformed_record,
          r.where() + "camera count exceeds file size");
  for (std::uint64_t i = 0; i < count; ++i) {
    CameraIntrinsics cam;
    cam.camera_id = r.pod<std::uint32_t>();
    cam.model = detail::camera_model_from_id(r.pod<std::int32_t>(), r.where());
    cam.width = std::uint32_t(r.pod<std::uint64_t>());
    cam.height = std::uint32_t(r.pod<std::uint64_t>());
    const int np = camera_model_param_count(cam.model);
    for (int p = 0; p < np; ++p) cam.params.push_back(r.pod<double>());
    require(!model.cameras.contains(cam.camera_id), errc::malformed_record,
            r.where() + "duplicate camera id " + std::to_string(cam.camera_id));
    model.cameras.emplace(cam.camera_id, std::move(cam));
  }
  r.expect_eof();
}

inline void parse_images_binary(const std::string& path, SparseModel& model) {
  detail::BinReader r(path);
  const auto count = r.pod<std::uint64_t>();
  require(count <= r.remaining() / 73, errc::malformed_record,
          r.where() + "image count exceeds file size");
  for (std::uint64_t i = 0; i < count; ++i) {
    ImagePose img;
    img.image_id = r.pod<std::uint32_t>();
    for (auto& q : img.rotation) q = r.pod<double>();
    for (auto& v : img.translation) v = r.pod<double>();
    img.camera_id = r.pod<std::uint32_t>();
    img.name = r.cstring();
    img.ensure_unit_rotation();
    const auto n_obs = r.pod<std::uint64_t>();
    require(n_obs <= r.remaining() / 24, errc::malformed_record,
            r.where() + "observation count exceeds file size");
    img.observations.resize(n_obs);
    for (auto& obs : img.observations) {
      obs.x = r.pod<double>();
      obs.y = r.pod<double>();
      obs.point3d_id = r.pod<std::uint64_t>();
    }
    require(!model.images.contains(img.image_id), errc::malformed_record,
            r.where() + "duplicate image id " + std::to_string(img.image_id));
    model.images.emplace(img.image_id, std::move(img));
  }
  r.expect_eof();
}

inline void parse_points_binary(const std::string& path, SparseModel& model) {
  detail::BinReader r(path);
  const auto count = r.pod<std::uint64_t>();
  require(count <= r.remaining() / 51, errc::malformed_record,
          r.where() + "point count exceeds file size");
  for (std::uint64_t i = 0; i < count; ++i) {
    Point3D pt;
    pt.point3d_id = r.pod<std::uint64_t>();
    for (auto& v : pt.xyz) v = r.pod<double>();
    for (auto& v : pt.rgb) v = r.pod<std::uint8_t>();
    pt.reprojection_error = r.pod<double>();
    const auto track_len = r.pod<std::uint64_t>();
    require(track_len <= r.remaining() / 8, errc::malformed_record,
            r.where() + "track length exceeds file size");
    pt.track.resize(track_len);
    for (auto& [image_id, p2d] : pt.track) {
      image_id = r.pod<std::uint32_t>();
      p2d = r.pod<std::uint32_t>();
    }
    require(!model.points.contains(pt.point3d_id), errc::malformed_record,
            r.where() + "duplicate point id " + std::to_string(pt.point3d_id));
    model.points.emplace(pt.point3d_id, std::move(pt));
  }
  r.expect_eof();
}

inline void write_cameras_binary(const std::string& path, const SparseModel& model) {
  detail::BinWriter w(path);
  w.pod(std::uint64_t(model.cameras.size()));
  for (const auto& [id, cam] : model.cameras) {
    w.pod(cam.camera_id);
    w.pod(std::int32_t(cam.model));
    w.pod(std::uint64_t(cam.width));
    w.pod(std::uint64_t(cam.height));
    for (double p : cam.params) w.pod(p);
  }
  w.close();
}

inline void write_images_binary(const std::string& path, const SparseModel& model) {
  detail::BinWriter w(path);
  w.pod(std::uint64_t(model.images.size()));
  for (const auto& [id, img] : model.images) {
    w.pod(img.image_id);
    for (double q : img.rotation) w.pod(q);
    for (double v : img.translation) w.pod(v);
    w.pod(img.camera_id);
    w.cstring(img.name);
    w.pod(std::uint64_t(img.observations.size()));
    for (const auto& obs : img.observations) {
      w.pod(obs.x);
      w.pod(obs.y);
      w.pod(obs.point3d_id);
    }
  }
  w.close();
}

inline void write_points_binary(const std::string& path, const SparseModel& model) {
  detail::BinWriter w(path);
  w.pod(std::uint64_t(model.points.size()));
  for (const auto& [id, pt] : model.points) {
    w.pod(pt.point3d_id);
    for (double v : pt.xyz) w.pod(v);
    for (auto v : pt.rgb) w.pod(v);
    w.pod(pt.reprojection_error);
    w.pod(std::uint64_t(pt.track.size()));
    for (const auto& [image_id, p2d] : pt.track) {
      w.pod(image_id);
      w.pod(p2d);
    }
  }
  w.close();
}

// ---------------------------------------------------------------------------
// descriptor sidecar: concatenated records of (uint64 point id, 128 bytes)

inline DescriptorMap parse_descriptor_sidecar(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  const auto size = std::uint64_t(is.tellg());
  is.seekg(0);
  require(size % 136 == 0, errc::truncated_record,
          path + ": size " + std::to_string(size) + " is not a multiple of 136");
  DescriptorMap out;
  for (std::uint64_t i = 0; i < size / 136; ++i) {
    std::uint64_t id;
    std::array<std::uint8_t, 128> desc;
    is.read(reinterpret_cast<char*>(&id), 8);
    is.read(reinterpret_cast<char*>(desc.data()), 128);
    require(bool(is), errc::truncated_record, path + ": short read");
    require(!out.contains(id), errc::duplicate_point_id,
            path + ": duplicate point id " + std::to_string(id));
    out.emplace(id, desc);
  }
  return out;
}

inline void write_descriptor_sidecar(const std::string& path, const SparseModel& model) {
  detail::BinWriter w(path);
  for (const auto& [id, pt] : model.points) {
    if (!pt.descriptor) continue;
    w.pod(id);
    for (auto b : *pt.descriptor) w.pod(b);
  }
  w.close();
}

// Attaches sidecar descriptors to matching points; lenient about sidecar ids
// that are not in the model (the sidecar may come from a superset). Returns
// the count of such unknown ids.
inline std::size_t attach_descriptors(SparseModel& model, const DescriptorMap& sidecar) {
  std::size_t unknown = 0;
  for (const auto& [id, desc] : sidecar) {
    auto it = model.points.find(id);
    if (it == model.points.end()) {
      ++unknown;
      continue;
    }
    it->second.descriptor = desc;
  }
  return unknown;
}

// ---------------------------------------------------------------------------

inline ModelFormat detect_format(const std::string& dir) {
  namespace fs = std::filesystem;
  if (fs::exists(fs::path(dir) / "cameras.bin")) return ModelFormat::binary;
  if (fs::exists(fs::path(dir) / "cameras.txt")) return ModelFormat::text;
  fail(errc::missing_file, dir + ": neither cameras.bin nor cameras.txt found");
}

inline SparseModel parse_model(const std::string& dir, ModelFormat format = ModelFormat::auto_detect) {
  namespace fs = std::filesystem;
  require(fs::exists(dir), errc::missing_file, dir + ": no such directory");
  if (format == ModelFormat::auto_detect) format = detect_format(dir);
  SparseModel model;
  const auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
  if (format == ModelFormat::binary) {
    parse_cameras_binary(p("cameras.bin"), model);
    parse_images_binary(p("images.bin"), model);
    parse_points_binary(p("points3D.bin"), model);
  } else {
    parse_cameras_text(p("cameras.txt"), model);
    parse_images_text(p("images.txt"), model);
    parse_points_text(p("points3D.txt"), model);
  }
  model.validate();
  return model;
}

inline void write_model(const SparseModel& model, const std::string& dir, ModelFormat format) {
  namespace fs = std::filesystem;
  require(format != ModelFormat::auto_detect, errc::invalid_config,
          "write_model needs an explicit format");
  model.validate();
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
  if (format == ModelFormat::binary) {
    write_cameras_binary(p("cameras.bin"), model);
    write_images_binary(p("images.bin"), model);
    write_points_binary(p("points3D.bin"), model);
  } else {
    write_cameras_text(p("cameras.txt"), model);
    write_images_text(p("images.txt"), model);
    write_points_text(p("points3D.txt"), model);
  }
  if (model.descriptor_count() > 0) write_descriptor_sidecar(p("descriptors.bin"), model);
}

// parse_model plus sidecar attachment when descriptors.bin is present.
inline SparseModel load_model(const std::string& dir,
                              ModelFormat format = ModelFormat::auto_detect) {
  auto model = parse_model(dir, format);
  const auto sidecar = std::filesystem::path(dir) / "descriptors.bin";
  if (std::filesystem::exists(sidecar))
    attach_descriptors(model, parse_descriptor_sidecar(sidecar.string()));
  return model;
}

}  // namespace sfminv::colmap
