#pragma once

// Triangle-mesh depth rendering by z-buffering: per pixel center, the
// minimum camera-space z over all covering triangles, with perspective-
// correct interpolation and near-plane clipping. Pixel centers sit at
// integer coordinates, matching the point projector.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "sfminv/geom/mesh.hpp"
#include "sfminv/render/view.hpp"

namespace sfminv::geom {

struct DepthBuffer {
  int height = 0, width = 0;
  std::vector<double> depth;  // +infinity where no surface

  DepthBuffer() = default;
  DepthBuffer(int h, int w)
      : height(h), width(w), depth(std::size_t(h) * w, std::numeric_limits<double>::infinity()) {}

  double at(int r, int c) const { return depth[std::size_t(r) * width + c]; }
};

// Depth plus which triangle won each pixel and the world-space hit point;
// the hit info drives textured target rendering for synthetic scenes.
struct SurfaceBuffer {
  DepthBuffer depth;
  std::vector<int> triangle;                    // -1 where no surface
  std::vector<std::array<double, 3>> point;     // world coordinates of the hit

  SurfaceBuffer() = default;
  SurfaceBuffer(int h, int w)
      : depth(h, w), triangle(std::size_t(h) * w, -1), point(std::size_t(h) * w, {0, 0, 0}) {}
};

namespace detail {

struct ClipVertex {
  std::array<double, 3> cam;    // camera space
  std::array<double, 3> world;  // carried through clipping for hit points
};

// Sutherland-Hodgman against the z = z_near plane.
inline int clip_near(const ClipVertex in[3], ClipVertex out[4], double z_near) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool ain = a.cam[2] > z_near;
    const bool bin = b.cam[2] > z_near;
    if (ain) out[n++] = a;
    if (ain != bin) {
      const double t = (z_near - a.cam[2]) / (b.cam[2] - a.cam[2]);
      ClipVertex v;
      for (int k = 0; k < 3; ++k) {
        v.cam[std::size_t(k)] = a.cam[std::size_t(k)] + t * (b.cam[std::size_t(k)] - a.cam[std::size_t(k)]);
        v.world[std::size_t(k)] =
            a.world[std::size_t(k)] + t * (b.world[std::size_t(k)] - a.world[std::size_t(k)]);
      }
      out[n++] = v;
    }
  }
  return n;
}

}  // namespace detail

inline void render_mesh_into(const TriangleMesh& mesh, const render::ViewSpec& view,
                             SurfaceBuffer& buf) {
  require(view.intrinsics.radial_k() == 0.0, errc::unsupported_camera_model,
          "mesh depth rendering requires an undistorted camera");
  const int H = view.out_height, W = view.out_width;
  const double fx = view.intrinsics.fx(), fy = view.intrinsics.fy();
  const double cx = view.intrinsics.cx(), cy = view.intrinsics.cy();

  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const auto& tri = mesh.triangles[ti];
    detail::ClipVertex cv[3];
    for (int i = 0; i < 3; ++i) {
      cv[i].world = mesh.vertices[std::size_t(tri[std::size_t(i)])];
      cv[i].cam = view.pose.to_camera(cv[i].world);
    }
    detail::ClipVertex poly[4];
    const int n = detail::clip_near(cv, poly, render::kZNear);
    for (int f = 1; f + 1 < n; ++f) {  // fan-triangulate the clipped polygon
      const detail::ClipVertex* v0 = &poly[0];
      const detail::ClipVertex* v1 = &poly[f];
      const detail::ClipVertex* v2 = &poly[f + 1];
      // screen coordinates
      const double u0 = fx * v0->cam[0] / v0->cam[2] + cx, w0 = fy * v0->cam[1] / v0->cam[2] + cy;
      const double u1 = fx * v1->cam[0] / v1->cam[2] + cx, w1 = fy * v1->cam[1] / v1->cam[2] + cy;
      const double u2 = fx * v2->cam[0] / v2->cam[2] + cx, w2 = fy * v2->cam[1] / v2->cam[2] + cy;
      double area = (u1 - u0) * (w2 - w0) - (u2 - u0) * (w1 - w0);
      if (area == 0.0) continue;
      const double sign = area > 0 ? 1.0 : -1.0;
      area *= sign;

      const int r0 = std::max(0, int(std::ceil(std::min({w0, w1, w2}))));
      const int r1 = std::min(H - 1, int(std::floor(std::max({w0, w1, w2}))));
      const int c0 = std::max(0, int(std::ceil(std::min({u0, u1, u2}))));
      const int c1 = std::min(W - 1, int(std::floor(std::max({u0, u1, u2}))));
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          const double px = double(c), py = double(r);
          const double e0 = sign * ((u1 - px) * (w2 - py) - (u2 - px) * (w1 - py));
          const double e1 = sign * ((u2 - px) * (w0 - py) - (u0 - px) * (w2 - py));
          const double e2 = sign * ((u0 - px) * (w1 - py) - (u1 - px) * (w0 - py));
          if (e0 < 0 || e1 < 0 || e2 < 0) continue;
          const double l0 = e0 / area, l1 = e1 / area, l2 = e2 / area;
          const double inv_z = l0 / v0->cam[2] + l1 / v1->cam[2] + l2 / v2->cam[2];
          const double z = 1.0 / inv_z;
          const std::size_t idx = std::size_t(r) * W + c;
          if (z < buf.depth.depth[idx]) {
            buf.depth.depth[idx] = z;
            buf.triangle[idx] = int(ti);
            for (int k = 0; k < 3; ++k)
              buf.point[idx][std::size_t(k)] =
                  (l0 * v0->world[std::size_t(k)] / v0->cam[2] +
                   l1 * v1->world[std::size_t(k)] / v1->cam[2] +
                   l2 * v2->world[std::size_t(k)] / v2->cam[2]) /
                  inv_z;
          }
        }
    }
  }
}

inline SurfaceBuffer render_mesh_surface(const TriangleMesh& mesh, const render::ViewSpec& view) {
  SurfaceBuffer buf(view.out_height, view.out_width);
  render_mesh_into(mesh, view, buf);
  return buf;
}

inline DepthBuffer render_mesh_depth(const TriangleMesh& mesh, const render::ViewSpec& view) {
  return render_mesh_surface(mesh, view).depth;
}

}  // namespace sfminv::geom
