#include <catch2/catch_amalgamated.hpp>

#include "sfminv/metrics/metrics.hpp"
#include "sfminv/metrics/report.hpp"
#include "support/tmpdir.hpp"

using namespace sfminv;
using namespace sfminv::metrics;

namespace {

Image random_image(int h, int w, int c, Rng& rng) {
  Image img(h, w, c);
  for (auto& v : img.data) v = float(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("mae basics and oracle", "[metrics]") {
  Rng rng(61);
  auto a = random_image(16, 16, 3, rng);
  REQUIRE(mae(a, a) == 0.0);

  Image black(16, 16, 3, 0.f), white(16, 16, 3, 1.f);
  REQUIRE(mae(black, white) == 1.0);

  auto b = random_image(16, 16, 3, rng);
  double want = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) want += std::abs(double(a.data[i]) - b.data[i]);
  want /= double(a.data.size());
  REQUIRE(mae(a, b) == Catch::Approx(want).margin(1e-12));

  Image small(8, 8, 3);
  REQUIRE_THROWS_AS(mae(a, small), error);
}

TEST_CASE("ssim identity, symmetry and closed form", "[metrics]") {
  Rng rng(67);
  auto a = random_image(24, 24, 3, rng);
  REQUIRE(ssim(a, a) == 1.0);

  auto b = random_image(24, 24, 3, rng);
  REQUIRE(ssim(a, b) == Catch::Approx(ssim(b, a)).margin(1e-12));

  // constant image against constant+0.5: variance terms vanish, so
  // ssim = (2*mx*my + C1)/(mx^2 + my^2 + C1) * (C2 / C2)
  Image c1(16, 16, 1, 0.25f), c2(16, 16, 1, 0.75f);
  const double mx = 0.25, my = 0.75, C1 = 0.0001;
  const double want = (2 * mx * my + C1) / (mx * mx + my * my + C1);
  REQUIRE(ssim(c1, c2) == Catch::Approx(want).margin(1e-9));

  Image tiny(8, 8, 1);
  REQUIRE_THROWS_AS(ssim(tiny, tiny), error);
}

TEST_CASE("metrics are invariant under shared pixel permutations", "[metrics][property]") {
  Rng rng(71);
  auto a = random_image(20, 20, 3, rng);
  auto b = random_image(20, 20, 3, rng);

  // mae: arbitrary permutation applied to both images
  std::vector<std::size_t> perm(20 * 20);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[std::size_t(rng.below(i + 1))]);
  Image pa(20, 20, 3), pb(20, 20, 3);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (int ch = 0; ch < 3; ++ch) {
      pa.data[i * 3 + std::size_t(ch)] = a.data[perm[i] * 3 + std::size_t(ch)];
      pb.data[i * 3 + std::size_t(ch)] = b.data[perm[i] * 3 + std::size_t(ch)];
    }
  REQUIRE(mae(pa, pb) == Catch::Approx(mae(a, b)).margin(1e-12));

  // ssim: geometric symmetries of the window (flips, 180-degree rotation)
  auto flip_h = [](const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        for (int ch = 0; ch < img.channels; ++ch)
          out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
    return out;
  };
  auto flip_v = [](const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        for (int ch = 0; ch < img.channels; ++ch)
          out.at(r, c, ch) = img.at(img.height - 1 - r, c, ch);
    return out;
  };
  REQUIRE(ssim(flip_h(a), flip_h(b)) == Catch::Approx(ssim(a, b)).margin(1e-12));
  REQUIRE(ssim(flip_v(a), flip_v(b)) == Catch::Approx(ssim(a, b)).margin(1e-12));
  REQUIRE(ssim(flip_h(flip_v(a)), flip_h(flip_v(b))) == Catch::Approx(ssim(a, b)).margin(1e-12));
}

TEST_CASE("visibility accuracy counting", "[metrics]") {
  geom::VisibilityMask a(8, 8), b(8, 8);
  // 4 occupied cells
  a.set(1, 1, geom::Vis::visible);
  a.set(2, 2, geom::Vis::occluded);
  a.set(3, 3, geom::Vis::visible);
  a.set(4, 4, geom::Vis::occluded);
  b = a;
  REQUIRE(visibility_accuracy(a, b) == 1.0);

  // fully inverted
  geom::VisibilityMask c = a;
  for (auto& s : c.state) {
    if (s == std::uint8_t(geom::Vis::visible)) s = std::uint8_t(geom::Vis::occluded);
    else if (s == std::uint8_t(geom::Vis::occluded)) s = std::uint8_t(geom::Vis::visible);
  }
  REQUIRE(visibility_accuracy(c, b) == 0.0);

  // half matching
  geom::VisibilityMask d = a;
  d.set(1, 1, geom::Vis::occluded);
  d.set(2, 2, geom::Vis::visible);
  REQUIRE(visibility_accuracy(d, b) == 0.5);

  // occupancy mismatch is an error
  geom::VisibilityMask e = a;
  e.set(5, 5, geom::Vis::visible);
  REQUIRE_THROWS_AS(visibility_accuracy(e, b), error);
}

TEST_CASE("csv round trip reproduces aggregates bit-exactly", "[metrics]") {
  testutil::TmpDir tmp;
  Rng rng(73);
  MetricReport report;
  for (int i = 0; i < 12; ++i) {
    MetricRow r;
    r.sample_id = "s" + std::to_string(i);
    r.schema = i % 2 ? "z,c" : "z";
    r.visibility_mode = "net";
    r.sparsity = (i % 3 == 0) ? 0.2 : (i % 3 == 1 ? 0.6 : 1.0);
    r.mae = rng.uniform(0.01, 0.4);
    r.ssim = rng.uniform(0.2, 0.99);
    if (i % 2) r.visib_acc = rng.uniform(0.5, 1.0);
    report.rows.push_back(r);
  }
  write_csv(tmp.path("report.csv"), report);
  auto back = read_csv(tmp.path("report.csv"));
  REQUIRE(back.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    REQUIRE(back.rows[i].mae == report.rows[i].mae);
    REQUIRE(back.rows[i].ssim == report.rows[i].ssim);
    REQUIRE(back.rows[i].sparsity == report.rows[i].sparsity);
  }

  auto a1 = report.aggregates();
  auto a2 = back.aggregates();
  REQUIRE(a1.size() == a2.size());
  for (const auto& [key, agg] : a1) {
    REQUIRE(a2.contains(key));
    REQUIRE(a2.at(key).mae == agg.mae);
    REQUIRE(a2.at(key).ssim == agg.ssim);
  }

  auto table = render_table(report);
  REQUIRE(table.find("MAE 20%") != std::string::npos);
  REQUIRE(table.find("SSIM 100%") != std::string::npos);
  REQUIRE(table.find("z,c") != std::string::npos);
}
