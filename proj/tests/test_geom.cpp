#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "sfminv/geom/mesh.hpp"
#include "sfminv/geom/visibility.hpp"
#include "support/tmpdir.hpp"

using namespace sfminv;
using namespace sfminv::geom;

namespace {

render::ViewSpec simple_view(int size, double f) {
  render::ViewSpec view;
  view.intrinsics.camera_id = 1;
  view.intrinsics.model = colmap::CameraModel::pinhole;
  view.intrinsics.width = std::uint32_t(size);
  view.intrinsics.height = std::uint32_t(size);
  view.intrinsics.params = {f, f, size / 2.0, size / 2.0};
  view.out_width = view.out_height = size;
  return view;
}

// fronto-parallel axis-aligned rectangle at depth z, two triangles
void add_rect(TriangleMesh& mesh, double x0, double x1, double y0, double y1, double z) {
  const int base = int(mesh.vertices.size());
  mesh.vertices.push_back({x0, y0, z});
  mesh.vertices.push_back({x1, y0, z});
  mesh.vertices.push_back({x1, y1, z});
  mesh.vertices.push_back({x0, y1, z});
  mesh.triangles.push_back({base, base + 1, base + 2});
  mesh.triangles.push_back({base, base + 2, base + 3});
}

render::FeatureMap depth_only_map(int size, const std::vector<std::array<double, 3>>& cells) {
  // cells: (row, col, depth)
  render::FeatureMap map(size, size, render::ChannelSchema::parse("z"));
  for (const auto& c : cells) {
    const auto idx = map.cell(int(c[0]), int(c[1]));
    if (!map.occupancy[idx]) ++map.occupied_count;
    map.occupancy[idx] = 1;
    map.raw_depth[idx] = c[2];
    map.data[idx] = float(c[2]);  // encoding irrelevant for visibility ops
  }
  return map;
}

// Moller-Trumbore ray cast through pixel centers; direction z-normalized so
// the ray parameter equals camera-space depth.
double raycast_depth(const TriangleMesh& mesh, const render::ViewSpec& view, int row, int col) {
  const double fx = view.intrinsics.fx(), fy = view.intrinsics.fy();
  const double cx = view.intrinsics.cx(), cy = view.intrinsics.cy();
  const std::array<double, 3> dir = {(col - cx) / fx, (row - cy) / fy, 1.0};
  // camera at origin, rays in camera space; transform vertices first
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    std::array<std::array<double, 3>, 3> v;
    for (int i = 0; i < 3; ++i) v[i] = view.pose.to_camera(mesh.vertices[std::size_t(tri[i])]);
    const auto e1 = std::array<double, 3>{v[1][0] - v[0][0], v[1][1] - v[0][1], v[1][2] - v[0][2]};
    const auto e2 = std::array<double, 3>{v[2][0] - v[0][0], v[2][1] - v[0][1], v[2][2] - v[0][2]};
    auto cross = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
      return std::array<double, 3>{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                                   a[0] * b[1] - a[1] * b[0]};
    };
    auto dot = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
      return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    };
    const auto pvec = cross(dir, e2);
    const double det = dot(e1, pvec);
    if (det == 0.0) continue;
    const double inv = 1.0 / det;
    const auto tvec = std::array<double, 3>{-v[0][0], -v[0][1], -v[0][2]};
    const double u = dot(tvec, pvec) * inv;
    if (u < 0 || u > 1) continue;
    const auto qvec = cross(tvec, e1);
    const double w = dot(dir, qvec) * inv;
    if (w < 0 || u + w > 1) continue;
    const double t = dot(e2, qvec) * inv;
    if (t > 1e-4) best = std::min(best, t);
  }
  return best;
}

}  // namespace

TEST_CASE("visib_sparse basics", "[geom]") {
  SECTION("isolated occupied cell is visible") {
    auto map = depth_only_map(16, {{8, 8, 42.0}});
    auto mask = visib_sparse(map);
    REQUIRE(mask.at(8, 8) == Vis::visible);
    REQUIRE(mask.count(Vis::occluded) == 0);
  }
  SECTION("the 5% ratio rule around a depth-10 neighbor") {
    auto near = depth_only_map(16, {{8, 8, 10.0}, {8, 9, 10.4}});
    auto m1 = visib_sparse(near);
    REQUIRE(m1.at(8, 9) == Vis::visible);  // 10.4 <= 1.05 * 10
    auto far = depth_only_map(16, {{8, 8, 10.0}, {8, 9, 10.6}});
    auto m2 = visib_sparse(far);
    REQUIRE(m2.at(8, 9) == Vis::occluded);  // 10.6 > 1.05 * 10
    REQUIRE(m2.at(8, 8) == Vis::visible);
  }
}

TEST_CASE("visib_sparse equals the nested-loop oracle and scales", "[geom][oracle]") {
  Rng rng(41);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<std::array<double, 3>> cells;
    const int n = 200 + int(rng.below(400));
    for (int i = 0; i < n; ++i)
      cells.push_back({double(rng.below(64)), double(rng.below(64)), rng.uniform(1.0, 20.0)});
    auto map = depth_only_map(64, cells);
    auto mask = visib_sparse(map, 3, 0.05);

    // brute-force oracle
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        if (!map.occupied(r, c)) {
          REQUIRE(mask.at(r, c) == Vis::unoccupied);
          continue;
        }
        double mn = std::numeric_limits<double>::infinity();
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            int rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= 64 || cc < 0 || cc >= 64 || !map.occupied(rr, cc)) continue;
            mn = std::min(mn, map.raw_depth[map.cell(rr, cc)]);
          }
        const bool vis = map.raw_depth[map.cell(r, c)] <= 1.05 * mn;
        REQUIRE(mask.at(r, c) == (vis ? Vis::visible : Vis::occluded));
      }

    // ratio test: uniform scaling leaves the mask unchanged
    for (double lambda : {0.1, 10.0}) {
      auto scaled = map;
      for (auto& d : scaled.raw_depth) d *= lambda;
      REQUIRE(visib_sparse(scaled, 3, 0.05) == mask);
    }
  }
}

TEST_CASE("fronto-parallel square renders constant depth", "[geom]") {
  TriangleMesh mesh;
  add_rect(mesh, -20, 20, -20, 20, 5.0);
  auto view = simple_view(32, 16.0);
  auto buf = render_mesh_depth(mesh, view);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) REQUIRE(buf.at(r, c) == Catch::Approx(5.0).margin(1e-6));
}

TEST_CASE("empty mesh renders all infinity and labels everything visible", "[geom]") {
  TriangleMesh mesh;
  auto view = simple_view(16, 8.0);
  auto buf = render_mesh_depth(mesh, view);
  for (auto d : buf.depth) REQUIRE(std::isinf(d));

  auto map = depth_only_map(16, {{3, 3, 2.0}, {9, 12, 50.0}});
  auto mask = visib_dense(map, buf);
  REQUIRE(mask.count(Vis::visible) == 2);
  REQUIRE(mask.count(Vis::occluded) == 0);
}

TEST_CASE("mesh depth matches the ray-cast oracle on random triangles", "[geom][oracle]") {
  Rng rng(43);
  auto view = simple_view(64, 40.0);
  for (int scene = 0; scene < 4; ++scene) {
    TriangleMesh mesh;
    for (int t = 0; t < 20; ++t) {
      const int base = int(mesh.vertices.size());
      for (int i = 0; i < 3; ++i)
        mesh.vertices.push_back(
            {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(1.0, 9.0)});
      mesh.triangles.push_back({base, base + 1, base + 2});
    }
    mesh.validate();
    auto buf = render_mesh_depth(mesh, view);

    int agree = 0, total = 64 * 64;
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        const double want = raycast_depth(mesh, view, r, c);
        const double got = buf.at(r, c);
        if (std::isinf(want) && std::isinf(got)) ++agree;
        else if (std::isfinite(want) && std::isfinite(got) && std::abs(want - got) < 1e-6) ++agree;
      }
    REQUIRE(double(agree) / total >= 0.999);
  }
}

TEST_CASE("triangle order does not change the depth buffer", "[geom][property]") {
  Rng rng(47);
  TriangleMesh mesh;
  for (int t = 0; t < 15; ++t) {
    const int base = int(mesh.vertices.size());
    for (int i = 0; i < 3; ++i)
      mesh.vertices.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1.0, 6.0)});
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  auto view = simple_view(48, 30.0);
  auto ref = render_mesh_depth(mesh, view);
  for (int perm = 0; perm < 3; ++perm) {
    auto shuffled = mesh;
    // deterministic permutation: rotate + reverse
    std::rotate(shuffled.triangles.begin(), shuffled.triangles.begin() + 4 + perm,
                shuffled.triangles.end());
    if (perm % 2) std::reverse(shuffled.triangles.begin(), shuffled.triangles.end());
    auto buf = render_mesh_depth(shuffled, view);
    REQUIRE(buf.depth == ref.depth);
  }
}

TEST_CASE("visib_dense rule evaluation", "[geom]") {
  TriangleMesh mesh;
  add_rect(mesh, -30, 30, -30, 30, 8.0);
  auto view = simple_view(16, 8.0);
  auto buf = render_mesh_depth(mesh, view);

  auto map = depth_only_map(16, {{4, 4, 5.0}, {8, 8, 8.2}, {12, 12, 8.0}});
  auto mask = visib_dense(map, buf, 0.01);
  REQUIRE(mask.at(4, 4) == Vis::visible);    // in front of the surface
  REQUIRE(mask.at(8, 8) == Vis::occluded);   // 8.2 > 1.01 * 8
  REQUIRE(mask.at(12, 12) == Vis::visible);  // on the surface

  render::FeatureMap small(8, 8, render::ChannelSchema::parse("z"));
  REQUIRE_THROWS_AS(visib_dense(small, buf), error);
}

TEST_CASE("two-plane scene matches the analytic occlusion partition", "[geom][oracle]") {
  // far plane at z=10 spans the full frustum; near plane at z=5 covers the
  // left half of the image. A far-plane point (x,y,10) is hidden exactly
  // when its ray crosses the near plane, i.e. when x < 0 (for |y| small).
  TriangleMesh mesh;
  add_rect(mesh, -12, 12, -12, 12, 10.0);
  add_rect(mesh, -6, 0, -6, 6, 5.0);
  auto view = simple_view(64, 32.0);

  colmap::SparseModel model;
  model.cameras.emplace(1, view.intrinsics);
  colmap::ImagePose img;
  img.image_id = 1;
  img.camera_id = 1;
  model.images.emplace(1, img);
  Rng rng(53);
  std::uint64_t id = 1;
  std::vector<std::uint64_t> left, right;
  for (int i = 0; i < 400; ++i) {
    colmap::Point3D pt;
    pt.point3d_id = id;
    double x = rng.uniform(-8.0, 8.0);
    if (std::abs(x) < 0.3) continue;  // stay clear of the occluder edge
    double y = rng.uniform(-4.0, 4.0);
    pt.xyz = {x, y, 10.0};
    (x < 0 ? left : right).push_back(id);
    model.points.emplace(id, pt);
    ++id;
  }

  auto map = render::render_view(model, view, render::ChannelSchema::parse("z"));
  auto mask = visib_dense(map, render_mesh_depth(mesh, view));
  int bad = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      if (!map.occupied(r, c)) continue;
      // analytic: occluded iff the point sits left of the optical axis
      const bool expect_occluded = c < 32;
      if ((mask.at(r, c) == Vis::occluded) != expect_occluded) ++bad;
    }
  REQUIRE(bad == 0);

  // label generation plumbing: one labeled pair per view
  LabeledScene scene{&model, &mesh, {view, view, view}};
  auto labels = generate_visibility_labels({scene}, render::ChannelSchema::parse("z"));
  REQUIRE(labels.size() == 3);
  REQUIRE(labels[0].second == mask);
}

TEST_CASE("convex mesh with on-surface points agrees with ray casting", "[geom][property]") {
  // axis-aligned box viewed from outside; sample points on its faces
  TriangleMesh mesh;
  const double lo = -2, hi = 2, zn = 6, zf = 10;
  std::vector<std::array<double, 3>> v = {
      {lo, lo, zn}, {hi, lo, zn}, {hi, hi, zn}, {lo, hi, zn},
      {lo, lo, zf}, {hi, lo, zf}, {hi, hi, zf}, {lo, hi, zf}};
  mesh.vertices = v;
  auto quad = [&](int a, int b, int c, int d) {
    mesh.triangles.push_back({a, b, c});
    mesh.triangles.push_back({a, c, d});
  };
  quad(0, 1, 2, 3);  // front
  quad(5, 4, 7, 6);  // back
  quad(4, 0, 3, 7);  // left
  quad(1, 5, 6, 2);  // right
  quad(4, 5, 1, 0);  // bottom
  quad(3, 2, 6, 7);  // top
  mesh.validate();

  auto view = simple_view(64, 48.0);
  colmap::SparseModel model;
  model.cameras.emplace(1, view.intrinsics);
  colmap::ImagePose img;
  img.image_id = 1;
  img.camera_id = 1;
  model.images.emplace(1, img);

  Rng rng(59);
  std::uint64_t id = 1;
  for (int i = 0; i < 500; ++i) {
    colmap::Point3D pt;
    pt.point3d_id = id++;
    const int face = int(rng.below(3));
    if (face == 0) pt.xyz = {rng.uniform(lo, hi), rng.uniform(lo, hi), zn};       // front
    else if (face == 1) pt.xyz = {rng.uniform(lo, hi), rng.uniform(lo, hi), zf};  // back
    else pt.xyz = {lo, rng.uniform(lo, hi), rng.uniform(zn, zf)};                 // left side
    model.points.emplace(pt.point3d_id, pt);
  }

  auto map = render::render_view(model, view, render::ChannelSchema::parse("z"));
  auto buf = render_mesh_depth(mesh, view);
  auto mask = visib_dense(map, buf);

  int agree = 0, total = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      if (!map.occupied(r, c)) continue;
      ++total;
      const double d = map.raw_depth[map.cell(r, c)];
      const double ray = raycast_depth(mesh, view, r, c);
      const bool expect_visible = d <= 1.01 * ray;
      if ((mask.at(r, c) == Vis::visible) == expect_visible) ++agree;
    }
  REQUIRE(total > 100);
  REQUIRE(double(agree) / total >= 0.999);
}

TEST_CASE("ply and obj mesh io", "[geom]") {
  testutil::TmpDir tmp;
  TriangleMesh mesh;
  add_rect(mesh, -1, 1, -1, 1, 3.0);
  mesh.vertices.push_back({9, 9, 9});
  mesh.triangles.push_back({0, 0, 1});  // degenerate, dropped by validate

  write_ply(tmp.path("m.ply"), mesh);
  auto back = load_ply(tmp.path("m.ply"));
  REQUIRE(back.vertices.size() == 5);
  REQUIRE(back.triangles.size() == 2);  // degenerate removed
  REQUIRE(back.vertices[0] == mesh.vertices[0]);

  std::ofstream os(tmp.path("m.obj"));
  os << "# tri\nv 0 0 5\nv 1 0 5\nv 0 1 5\nf 1 2 3\nf 1/1 2/2 3/3\n";
  os.close();
  auto obj = load_mesh(tmp.path("m.obj"));
  REQUIRE(obj.vertices.size() == 3);
  REQUIRE(obj.triangles.size() == 2);
  REQUIRE(obj.triangles[0] == std::array<int, 3>{0, 1, 2});

  std::ofstream bad(tmp.path("bad.obj"));
  bad << "v 0 0 0\nf 1 1 9\n";
  bad.close();
  REQUIRE_THROWS_AS(load_mesh(tmp.path("bad.obj")), error);
}
