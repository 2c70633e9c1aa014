#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sfminv/core/error.hpp"

namespace sfminv::geom {

struct TriangleMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> triangles;

  // Checks index ranges and drops exactly-degenerate (zero-area) triangles.
  void validate() {
    std::vector<std::array<int, 3>> kept;
    kept.reserve(triangles.size());
    for (const auto& tri : triangles) {
      for (int i : tri)
        require(i >= 0 && std::size_t(i) < vertices.size(), errc::malformed_record,
                "triangle index " + std::to_string(i) + " out of range");
      const auto& a = vertices[std::size_t(tri[0])];
      const auto& b = vertices[std::size_t(tri[1])];
      const auto& c = vertices[std::size_t(tri[2])];
      const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
      const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
      const double nx = uy * vz - uz * vy;
      const double ny = uz * vx - ux * vz;
      const double nz = ux * vy - uy * vx;
      if (nx * nx + ny * ny + nz * nz > 0) kept.push_back(tri);
    }
    triangles = std::move(kept);
  }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

inline double to_real(const std::string& tok, const std::string& where) {
  double v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && p == tok.data() + tok.size(), errc::malformed_record,
          where + ": bad real '" + tok + "'");
  return v;
}

inline long to_int(const std::string& tok, const std::string& where) {
  long v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && p == tok.data() + tok.size(), errc::malformed_record,
          where + ": bad integer '" + tok + "'");
  return v;
}

}  // namespace detail

// ASCII PLY with vertex x/y/z properties and triangular faces.
inline TriangleMesh load_ply(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  std::string line;
  require(std::getline(is, line) && line.starts_with("ply"), errc::malformed_record,
          path + ": not a ply file");

  long n_vertex = -1, n_face = -1;
  int xi = -1, yi = -1, zi = -1;
  int prop_index = 0;
  std::string current_element;
  while (std::getline(is, line)) {
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0] == "comment") continue;
    if (toks[0] == "format") {
      require(toks.size() >= 2 && toks[1] == "ascii", errc::malformed_record,
              path + ": only ascii ply supported");
    } else if (toks[0] == "element") {
      require(toks.size() == 3, errc::malformed_record, path + ": bad element line");
      current_element = toks[1];
      prop_index = 0;
      if (toks[1] == "vertex") n_vertex = detail::to_int(toks[2], path);
      else if (toks[1] == "face") n_face = detail::to_int(toks[2], path);
    } else if (toks[0] == "property") {
      if (current_element == "vertex" && toks.size() == 3) {
        if (toks[2] == "x") xi = prop_index;
        if (toks[2] == "y") yi = prop_index;
        if (toks[2] == "z") zi = prop_index;
      }
      ++prop_index;
    } else if (toks[0] == "end_header") {
      break;
    }
  }
  require(n_vertex >= 0 && xi >= 0 && yi >= 0 && zi >= 0, errc::malformed_record,
          path + ": vertex element with x y z required");

  TriangleMesh mesh;
  mesh.vertices.reserve(std::size_t(n_vertex));
  for (long i = 0; i < n_vertex; ++i) {
    require(bool(std::getline(is, line)), errc::malformed_record, path + ": truncated vertices");
    auto toks = detail::split_ws(line);
    require(int(toks.size()) > std::max({xi, yi, zi}), errc::malformed_record,
            path + ": short vertex line");
    mesh.vertices.push_back({detail::to_real(toks[std::size_t(xi)], path),
                             detail::to_real(toks[std::size_t(yi)], path),
                             detail::to_real(toks[std::size_t(zi)], path)});
  }
  for (long i = 0; i < std::max(n_face, 0L); ++i) {
    require(bool(std::getline(is, line)), errc::malformed_record, path + ": truncated faces");
    auto toks = detail::split_ws(line);
    require(!toks.empty(), errc::malformed_record, path + ": empty face line");
    const long count = detail::to_int(toks[0], path);
    require(count == 3 && toks.size() >= 4, errc::malformed_record,
            path + ": only triangular faces supported");
    mesh.triangles.push_back({int(detail::to_int(toks[1], path)),
                              int(detail::to_int(toks[2], path)),
                              int(detail::to_int(toks[3], path))});
  }
  mesh.validate();
  return mesh;
}

// OBJ subset: v and f records, triangles only, 1-based indices.
inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), errc::missing_file, "cannot open: " + path);
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0] == "#") continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (toks[0] == "v") {
      require(toks.size() >= 4, errc::malformed_record, where + ": short vertex");
      mesh.vertices.push_back({detail::to_real(toks[1], where), detail::to_real(toks[2], where),
                               detail::to_real(toks[3], where)});
    } else if (toks[0] == "f") {
      require(toks.size() == 4, errc::malformed_record, where + ": only triangles supported");
      std::array<int, 3> tri;
      for (int i = 0; i < 3; ++i) {
        std::string tok = toks[std::size_t(i + 1)];
        if (auto slash = tok.find('/'); slash != std::string::npos) tok = tok.substr(0, slash);
        const long idx = detail::to_int(tok, where);
        require(idx > 0, errc::malformed_record, where + ": indices must be positive");
        tri[std::size_t(i)] = int(idx - 1);
      }
      mesh.triangles.push_back(tri);
    }
  }
  mesh.validate();
  return mesh;
}

inline TriangleMesh load_mesh(const std::string& path) {
  if (path.ends_with(".obj")) return load_obj(path);
  return load_ply(path);
}

inline void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  require(bool(os), errc::io_failure, "cannot open for writing: " + path);
  os << "ply\nformat ascii 1.0\n";
  os << "element vertex " << mesh.vertices.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  os << "element face " << mesh.triangles.size() << "\n";
  os << "property list uchar int vertex_indices\nend_header\n";
  char buf[40];
  auto real = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    os.write(buf, p - buf);
  };
  for (const auto& v : mesh.vertices) {
    real(v[0]);
    os << ' ';
    real(v[1]);
    os << ' ';
    real(v[2]);
    os << '\n';
  }
  for (const auto& t : mesh.triangles)
    os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  require(bool(os), errc::io_failure, "write failed: " + path);
}

}  // namespace sfminv::geom
