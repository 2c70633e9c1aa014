#include <catch2/catch_amalgamated.hpp>

#include "sfminv/nn/adam.hpp"
#include "sfminv/nn/checkpoint.hpp"
#include "sfminv/nn/graph.hpp"
#include "sfminv/nn/init.hpp"
#include "sfminv/nn/layers.hpp"
#include "sfminv/nn/ops.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"

using namespace sfminv;
using namespace sfminv::nn;

namespace {

// Rebuilds a fresh tape around `body` and returns the scalar loss; used by
// the finite-difference probes, which tweak parameter values in place.
template <typename Body>
double run_loss(Body&& body) {
  Graph<double> g;
  return g.val(body(g)).v[0];
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop oracle", "[nn][conv]") {
  Rng rng(42);
  auto x = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  auto w = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  auto b = oracle::random_tensor<double>({3}, rng);
  auto got = ops::conv2d_forward(x, w, b, 1, 1);
  auto want = oracle::conv2d(x, w, b, 1, 1);
  REQUIRE(got.shape == want.shape);
  for (std::size_t i = 0; i < got.v.size(); ++i)
    REQUIRE(std::abs(got.v[i] - want.v[i]) < 1e-10);

  // stride-2 4x4 halves spatial dims
  auto x2 = oracle::random_tensor<double>({2, 3, 8, 8}, rng);
  auto w2 = oracle::random_tensor<double>({4, 3, 4, 4}, rng);
  auto b2 = oracle::random_tensor<double>({4}, rng);
  auto got2 = ops::conv2d_forward(x2, w2, b2, 2, 1);
  auto want2 = oracle::conv2d(x2, w2, b2, 2, 1);
  REQUIRE(got2.shape == Shape{2, 4, 4, 4});
  for (std::size_t i = 0; i < got2.v.size(); ++i)
    REQUIRE(std::abs(got2.v[i] - want2.v[i]) < 1e-10);
}

TEST_CASE("conv2d zero weights pass the bias through", "[nn][conv]") {
  Tensor<double> x({1, 1, 4, 4});
  for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = double(i);
  Tensor<double> w({1, 1, 4, 4});
  Tensor<double> b({1});
  b.v[0] = 0.7;
  auto y = ops::conv2d_forward(x, w, b, 2, 1);
  REQUIRE(y.shape == Shape{1, 1, 2, 2});
  for (auto v : y.v) REQUIRE(v == Catch::Approx(0.7));
}

TEST_CASE("conv2d identity kernel preserves the input", "[nn][conv]") {
  Rng rng(7);
  auto x = oracle::random_tensor<double>({1, 1, 5, 5}, rng);
  Tensor<double> w({1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0;
  Tensor<double> b({1});
  auto y = ops::conv2d_forward(x, w, b, 1, 1);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) REQUIRE(y.v[i] == Catch::Approx(x.v[i]));
}

TEST_CASE("stride-2 shape algebra: six encoder convs divide by 64", "[nn][conv]") {
  std::int64_t h = 256;
  for (int i = 0; i < 6; ++i) h = ops::conv_out_dim(h, 4, 2, 1);
  REQUIRE(h == 4);  // 256 / 2^6
  std::int64_t h2 = 64;
  for (int i = 0; i < 6; ++i) h2 = ops::conv_out_dim(h2, 4, 2, 1);
  REQUIRE(h2 == 1);
}

TEST_CASE("conv2d gradients pass finite differences on a 3-layer stack", "[nn][grad]") {
  Rng rng(11);
  auto c1 = ConvLayer<double>::make("c1", 2, 3, 4, 2, 1, rng);
  auto c2 = ConvLayer<double>::make("c2", 3, 3, 3, 1, 1, rng);
  auto c3 = ConvLayer<double>::make("c3", 3, 1, 3, 1, 1, rng);
  auto x0 = oracle::random_tensor<double>({2, 2, 8, 8}, rng);
  auto target = oracle::random_tensor<double>({2, 1, 4, 4}, rng);

  auto build = [&](Graph<double>& g) {
    auto x = g.input(x0, true);
    auto h1 = g.relu(g.conv2d(x, c1.w, c1.b, 2, 1));
    auto h2 = g.relu(g.conv2d(h1, c2.w, c2.b, 1, 1));
    auto y = g.conv2d(h2, c3.w, c3.b, 1, 1);
    return g.sqdiff_mean(y, g.input(target));
  };

  Graph<double> g;
  auto loss = build(g);
  g.backward(loss);
  auto xgrad = g.grad(0).v;  // input node was pushed first

  auto loss_fn = [&] { return run_loss(build); };
  for (auto* p : {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b}) {
    double err = oracle::finite_diff_check(p->value.v, p->grad.v, loss_fn, rng, 8);
    INFO(p->name);
    REQUIRE(err < 1e-4);
  }
  REQUIRE(oracle::finite_diff_check(x0.v, xgrad, loss_fn, rng, 8) < 1e-4);
}

TEST_CASE("batchnorm train mode standardizes per channel", "[nn][bn]") {
  Rng rng(3);
  auto bn = BatchNormLayer<double>::make("bn", 3, rng);
  auto x = oracle::random_tensor<double>({4, 3, 6, 6}, rng, -2.0, 5.0);
  ops::BnSaved<double> saved;
  auto y = ops::batchnorm_forward(x, bn.gamma.value, bn.beta.value, bn.running_mean,
                                  bn.running_var, ops::BnMode::train, 0.9, 1e-5, &saved);
  // gamma=1, beta=0: per-channel mean ~0, variance ~1
  const std::int64_t C = 3, per = 4 * 36;
  for (std::int64_t c = 0; c < C; ++c) {
    double mean = 0, var = 0;
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t i = 0; i < 36; ++i) mean += y.at(n, c, i / 6, i % 6);
    mean /= per;
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t i = 0; i < 36; ++i) {
        double d = y.at(n, c, i / 6, i % 6) - mean;
        var += d * d;
      }
    var /= per;
    REQUIRE(std::abs(mean) < 1e-6);
    REQUIRE(var == Catch::Approx(1.0).margin(1e-4));
  }
}

TEST_CASE("batchnorm constant channel maps to zero before affine", "[nn][bn]") {
  Rng rng(3);
  auto bn = BatchNormLayer<double>::make("bn", 1, rng);
  Tensor<double> x({2, 1, 3, 3});
  x.fill(5.5);
  auto y = ops::batchnorm_forward(x, bn.gamma.value, bn.beta.value, bn.running_mean,
                                  bn.running_var, ops::BnMode::train, 0.9, 1e-5, nullptr);
  for (auto v : y.v) REQUIRE(std::abs(v) < 1e-6);
}

TEST_CASE("batchnorm rejects a single-value batch in train mode", "[nn][bn]") {
  Rng rng(3);
  auto bn = BatchNormLayer<double>::make("bn", 1, rng);
  Tensor<double> x({1, 1, 1, 1});
  REQUIRE_THROWS_MATCHES(
      ops::batchnorm_forward(x, bn.gamma.value, bn.beta.value, bn.running_mean, bn.running_var,
                             ops::BnMode::train, 0.9, 1e-5, nullptr),
      error, Catch::Matchers::Predicate<error>([](const error& e) {
        return e.code() == errc::degenerate_batch;
      }));
}

TEST_CASE("batchnorm eval mode is a fixed affine map", "[nn][bn]") {
  Rng rng(5);
  auto bn = BatchNormLayer<double>::make("bn", 2, rng);
  bn.running_mean.v = {0.3, -1.0};
  bn.running_var.v = {2.0, 0.5};
  auto x = oracle::random_tensor<double>({1, 2, 4, 4}, rng);
  auto y1 = ops::batchnorm_forward(x, bn.gamma.value, bn.beta.value, bn.running_mean,
                                   bn.running_var, ops::BnMode::eval, 0.9, 1e-5, nullptr);
  // same rows inside a larger batch give identical outputs
  Tensor<double> xb({3, 2, 4, 4});
  for (int n = 0; n < 3; ++n)
    std::copy(x.v.begin(), x.v.end(), xb.v.begin() + n * x.numel());
  xb.v[0] += 100.0;  // perturb a different sample
  auto y2 = ops::batchnorm_forward(xb, bn.gamma.value, bn.beta.value, bn.running_mean,
                                   bn.running_var, ops::BnMode::eval, 0.9, 1e-5, nullptr);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    REQUIRE(y2.v[std::size_t(x.numel() + i)] == y1.v[std::size_t(i)]);
}

TEST_CASE("batchnorm gradients pass finite differences", "[nn][grad]") {
  Rng rng(13);
  auto bn = BatchNormLayer<double>::make("bn", 2, rng);
  auto x0 = oracle::random_tensor<double>({3, 2, 4, 4}, rng);
  auto target = oracle::random_tensor<double>({3, 2, 4, 4}, rng);
  auto build = [&](Graph<double>& g) {
    auto x = g.input(x0, true);
    auto y = g.batchnorm(x, bn.gamma, bn.beta, bn.running_mean, bn.running_var,
                         ops::BnMode::train_no_update, 0.9, 1e-5);
    return g.sqdiff_mean(y, g.input(target));
  };
  Graph<double> g;
  auto loss = build(g);
  g.backward(loss);
  auto xgrad = g.grad(0).v;
  auto loss_fn = [&] { return run_loss(build); };
  REQUIRE(oracle::finite_diff_check(bn.gamma.value.v, bn.gamma.grad.v, loss_fn, rng, 2) < 1e-4);
  REQUIRE(oracle::finite_diff_check(bn.beta.value.v, bn.beta.grad.v, loss_fn, rng, 2) < 1e-4);
  REQUIRE(oracle::finite_diff_check(x0.v, xgrad, loss_fn, rng, 10) < 1e-4);
}

TEST_CASE("activation values", "[nn][ops]") {
  Tensor<double> x({1, 2});
  x.v = {0.0, 0.0};
  auto sm = ops::softmax_forward(x);
  REQUIRE(sm.v[0] == Catch::Approx(0.5));
  REQUIRE(sm.v[1] == Catch::Approx(0.5));

  Tensor<double> l({1});
  l.v = {-1.0};
  REQUIRE(ops::leaky_relu_forward(l, 0.2).v[0] == Catch::Approx(-0.2));

  Tensor<double> mp({1, 1, 2, 2});
  mp.v = {1, 2, 3, 4};
  REQUIRE(ops::maxpool2x2_forward(mp, nullptr).v[0] == Catch::Approx(4.0));

  // d tanh / dx at 0 is exactly 1
  Graph<double> g;
  Tensor<double> z({1});
  auto zi = g.input(z, true);
  auto t = g.tanh_(zi);
  auto lo = g.scale(t, 1.0);
  g.backward(lo);
  REQUIRE(g.grad(zi).v[0] == Catch::Approx(1.0));
}

TEST_CASE("elementwise and pooling gradients pass finite differences", "[nn][grad]") {
  Rng rng(17);
  auto x0 = oracle::random_tensor<double>({2, 3, 4, 4}, rng);
  auto target = oracle::random_tensor<double>({2, 3, 2, 2}, rng);
  auto build_pool = [&](Graph<double>& g) {
    auto x = g.input(x0, true);
    return g.sqdiff_mean(g.maxpool2x2(g.leaky_relu(g.tanh_(x), 0.2)), g.input(target));
  };
  Graph<double> g;
  auto loss = build_pool(g);
  g.backward(loss);
  auto xgrad = g.grad(0).v;
  REQUIRE(oracle::finite_diff_check(x0.v, xgrad, [&] { return run_loss(build_pool); }, rng, 12) <
          1e-4);
}

TEST_CASE("upsample2x routes the sum of four output grads to each input cell", "[nn][grad]") {
  Rng rng(19);
  auto x0 = oracle::random_tensor<double>({1, 2, 3, 3}, rng);
  auto target = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  auto build = [&](Graph<double>& g) {
    auto x = g.input(x0, true);
    return g.sqdiff_mean(g.upsample2x(x), g.input(target));
  };
  Graph<double> g;
  auto loss = build(g);
  g.backward(loss);
  auto xgrad = g.grad(0).v;
  REQUIRE(oracle::finite_diff_check(x0.v, xgrad, [&] { return run_loss(build); }, rng, 10) < 1e-4);

  // structural check: grad of each input cell equals the sum over its 2x2 block
  auto up = ops::upsample2x_forward(x0);
  Tensor<double> dy(up.shape);
  for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] = double(i % 7) - 3.0;
  Tensor<double> dx(x0.shape);
  ops::upsample2x_backward(dy, dx);
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t h = 0; h < 3; ++h)
      for (std::int64_t w = 0; w < 3; ++w) {
        double want = dy.at(0, c, 2 * h, 2 * w) + dy.at(0, c, 2 * h, 2 * w + 1) +
                      dy.at(0, c, 2 * h + 1, 2 * w) + dy.at(0, c, 2 * h + 1, 2 * w + 1);
        REQUIRE(dx.at(0, c, h, w) == Catch::Approx(want));
      }
}

TEST_CASE("fc, softmax, concat and nll gradients pass finite differences", "[nn][grad]") {
  Rng rng(23);
  auto fc1 = FcLayer<double>::make("fc1", 16, 5, rng);
  auto fc2 = FcLayer<double>::make("fc2", 5, 2, rng);
  auto x0 = oracle::random_tensor<double>({3, 4, 1, 2}, rng);
  auto x1 = oracle::random_tensor<double>({3, 4, 1, 2}, rng);
  std::vector<int> targets = {0, 1, 1};
  auto build = [&](Graph<double>& g) {
    auto a = g.input(x0, true);
    auto b = g.input(x1, true);
    auto x = g.flatten(g.concat(a, b));
    auto h = g.leaky_relu(g.fc(x, fc1.w, fc1.b), 0.2);
    auto z = g.fc(h, fc2.w, fc2.b);
    return g.nll(z, targets);
  };
  Graph<double> g;
  auto loss = build(g);
  g.backward(loss);
  auto agrad = g.grad(0).v;
  auto bgrad = g.grad(1).v;
  auto loss_fn = [&] { return run_loss(build); };
  REQUIRE(oracle::finite_diff_check(fc1.w.value.v, fc1.w.grad.v, loss_fn, rng, 8) < 1e-4);
  REQUIRE(oracle::finite_diff_check(fc2.w.value.v, fc2.w.grad.v, loss_fn, rng, 6) < 1e-4);
  REQUIRE(oracle::finite_diff_check(fc2.b.value.v, fc2.b.grad.v, loss_fn, rng, 2) < 1e-4);
  REQUIRE(oracle::finite_diff_check(x0.v, agrad, loss_fn, rng, 6) < 1e-4);
  REQUIRE(oracle::finite_diff_check(x1.v, bgrad, loss_fn, rng, 6) < 1e-4);
}

TEST_CASE("masked bce and l1 gradients pass finite differences", "[nn][grad]") {
  Rng rng(29);
  // pre-activation through tanh so predictions stay inside (-1,1)
  auto z0 = oracle::random_tensor<double>({2, 1, 4, 4}, rng, -2.0, 2.0);
  std::vector<std::uint8_t> labels(z0.v.size()), mask(z0.v.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.below(3) > 0;
    labels[i] = rng.below(2);
  }
  auto build = [&](Graph<double>& g) {
    auto z = g.input(z0, true);
    return g.masked_tanh_bce(g.tanh_(z), labels, mask);
  };
  Graph<double> g;
  auto loss = build(g);
  g.backward(loss);
  auto zgrad = g.grad(0).v;
  REQUIRE(oracle::finite_diff_check(z0.v, zgrad, [&] { return run_loss(build); }, rng, 12) < 1e-4);

  auto a0 = oracle::random_tensor<double>({2, 3, 4, 4}, rng);
  auto b0 = oracle::random_tensor<double>({2, 3, 4, 4}, rng);
  auto build_l1 = [&](Graph<double>& g2) {
    auto a = g2.input(a0, true);
    return g2.l1_mean(a, g2.input(b0));
  };
  Graph<double> g2;
  auto l1 = build_l1(g2);
  g2.backward(l1);
  auto agrad = g2.grad(0).v;
  REQUIRE(oracle::finite_diff_check(a0.v, agrad, [&] { return run_loss(build_l1); }, rng, 10) <
          1e-4);
}

TEST_CASE("adam basics", "[nn][adam]") {
  Rng rng(31);
  auto p = make_param<double>("p", {2, 2}, Init::xavier, rng);
  auto before = p.value.v;

  SECTION("zero gradient leaves parameters unchanged") {
    Adam<double> opt;
    p.zero_grad();
    opt.step({&p});
    REQUIRE(p.value.v == before);
  }

  SECTION("lr = 0 is the identity") {
    Adam<double> opt({.lr = 0.0});
    p.grad.v = {1.0, -2.0, 3.0, 0.5};
    opt.step({&p});
    REQUIRE(p.value.v == before);
  }

  SECTION("first step matches the hand-computed bias-corrected update") {
    Adam<double>::Config cfg;
    cfg.lr = 0.01;
    Adam<double> opt(cfg);
    p.grad.v = {1.0, -2.0, 3.0, 0.5};
    opt.step({&p});
    for (std::size_t i = 0; i < 4; ++i) {
      const double gr = (i == 0 ? 1.0 : i == 1 ? -2.0 : i == 2 ? 3.0 : 0.5);
      // t=1: mhat = g, vhat = g^2 -> step = -lr * g / (|g| + eps)
      const double want = before[i] - cfg.lr * gr / (std::abs(gr) + cfg.eps);
      REQUIRE(p.value.v[i] == Catch::Approx(want).epsilon(1e-12));
    }
  }

  SECTION("identical runs are bit-identical") {
    auto run = [&] {
      Rng r2(99);
      auto q = make_param<double>("q", {4, 2}, Init::xavier, r2);
      Adam<double> opt;
      for (int it = 0; it < 5; ++it) {
        for (std::size_t i = 0; i < q.grad.v.size(); ++i)
          q.grad.v[i] = std::sin(double(it + 1) * double(i + 1));
        opt.step({&q});
        q.zero_grad();
      }
      return q.value.v;
    };
    REQUIRE(run() == run());
  }
}

TEST_CASE("xavier init respects the bound and variance", "[nn][init]") {
  const std::int64_t fi = 64, fo = 32;
  auto t = xavier_init<double>({fo, fi}, 1234u);
  const double bound = std::sqrt(6.0 / double(fi + fo));
  double mean = 0;
  for (auto v : t.v) {
    REQUIRE(std::abs(v) <= bound);
    mean += v;
  }
  mean /= double(t.numel());
  double var = 0;
  for (auto v : t.v) var += (v - mean) * (v - mean);
  var /= double(t.numel());
  const double want = 2.0 / double(fi + fo);
  REQUIRE(var == Catch::Approx(want).epsilon(0.10));

  auto t2 = xavier_init<double>({fo, fi}, 1234u);
  REQUIRE(t.v == t2.v);
  auto t3 = xavier_init<double>({fo, fi}, 1235u);
  REQUIRE(t.v != t3.v);
}

TEST_CASE("checkpoint round-trips bit-exactly", "[nn][checkpoint]") {
  testutil::TmpDir tmp;
  Rng rng(37);
  NamedTensors entries;
  entries.emplace_back("net.c1.w", oracle::random_tensor<float>({4, 3, 3, 3}, rng));
  entries.emplace_back("net.c1.b", oracle::random_tensor<float>({4}, rng));
  entries.emplace_back("net.bn.running_var", oracle::random_tensor<float>({4}, rng, 0.1, 2.0));
  const auto path = tmp.path("ckpt.bin");
  save_tensors(path, entries);
  auto loaded = load_tensors(path);
  REQUIRE(loaded.size() == entries.size());
  for (const auto& [name, t] : entries) {
    REQUIRE(loaded.contains(name));
    REQUIRE(loaded.at(name).shape == t.shape);
    REQUIRE(loaded.at(name).v == t.v);
  }
  REQUIRE_THROWS_AS(load_tensors(tmp.path("missing.bin")), error);
}
