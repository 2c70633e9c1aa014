#pragma once

// The full cascade: VisibNet culls occluded cells, CoarseNet produces an RGB
// image from the culled map, RefineNet sharpens it conditioned on map plus
// coarse image, and a conditional discriminator drives adversarial training
// of RefineNet. All four nets are built from one seed.

#include <optional>

#include "sfminv/core/image.hpp"
#include "sfminv/geom/visibility.hpp"
#include "sfminv/nets/discriminator.hpp"
#include "sfminv/nets/perceptual.hpp"
#include "sfminv/nets/unet.hpp"
#include "sfminv/nn/checkpoint.hpp"
#include "sfminv/render/feature_map.hpp"

namespace sfminv::nets {

struct LossWeights {
  double alpha = 0.01;   // perceptual weight
  double beta = 0.001;   // adversarial weight
};

enum class VisibilityMode { implicit, sparse, dense, net };

inline const char* visibility_mode_name(VisibilityMode m) {
  switch (m) {
    case VisibilityMode::implicit: return "implicit";
    case VisibilityMode::sparse: return "sparse";
    case VisibilityMode::dense: return "dense";
    case VisibilityMode::net: return "net";
  }
  return "?";
}

inline VisibilityMode visibility_mode_from(const std::string& s) {
  for (auto m : {VisibilityMode::implicit, VisibilityMode::sparse, VisibilityMode::dense,
                 VisibilityMode::net})
    if (s == visibility_mode_name(m)) return m;
  fail(errc::invalid_config, "unknown visibility mode '" + s + "'");
}

template <typename T>
struct NetworkBundle {
  render::ChannelSchema schema;
  UNet<T> visibnet;     // n -> 1, relu decoder
  UNet<T> coarsenet;    // n -> 3, relu decoder
  UNet<T> refinenet;    // n+3 -> 3, leaky relu decoder
  Discriminator<T> discriminator;
  FeatureExtractor<T> fx;
  LossWeights weights;
};

struct BundleOptions {
  int train_size = 256;  // discriminator build resolution
  LossWeights weights;
};

template <typename T>
NetworkBundle<T> build_bundle(const render::ChannelSchema& schema, std::uint64_t seed,
                              const BundleOptions& opts = {}) {
  require(schema.channels() >= 1, errc::invalid_config, "empty channel schema");
  const int n = schema.channels();
  Rng rng(seed);
  NetworkBundle<T> b;
  b.schema = schema;
  b.weights = opts.weights;
  b.visibnet = build_unet<T>("visibnet", n, 1, DecoderAct::relu, rng);
  b.coarsenet = build_unet<T>("coarsenet", n, 3, DecoderAct::relu, rng);
  b.refinenet = build_unet<T>("refinenet", n + 3, 3, DecoderAct::leaky_relu, rng);
  b.discriminator =
      build_discriminator<T>("disc", n, opts.train_size, opts.train_size, rng);
  b.fx = build_feature_extractor<T>(rng);
  return b;
}

// ---------------------------------------------------------------------------
// image/tensor conversions: images live in [0,1] HWC, net tensors in [-1,1]

inline nn::Tensor<float> image_to_net(const Image& img) {
  require(img.channels == 3, errc::shape_mismatch, "expected an RGB image");
  nn::Tensor<float> t({1, 3, img.height, img.width});
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) t.at(0, ch, r, c) = img.at(r, c, ch) * 2.f - 1.f;
  return t;
}

template <typename T>
Image net_to_image(const nn::Tensor<T>& t) {
  require(t.rank() == 4 && t.size(0) == 1 && t.size(1) == 3, errc::shape_mismatch,
          "expected a (1,3,H,W) tensor");
  Image img(int(t.size(2)), int(t.size(3)), 3);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = float((t.at(0, ch, r, c) + T(1)) / T(2));
  return img;
}

// ---------------------------------------------------------------------------
// eval-mode forwards

// Per-pixel field in (-1,1); P(visible) = (value+1)/2, meaningful at
// occupied cells only.
template <typename T>
nn::Tensor<T> forward_visibnet(UNet<T>& net, const render::FeatureMap& map) {
  nn::EvalCtx<T> ctx;
  auto out = unet_forward(ctx, net, ctx.input(render::to_tensor(map).template cast<T>()));
  return *out;
}

// Zeroes cells whose predicted visibility probability falls below threshold.
template <typename T>
render::FeatureMap cull(const render::FeatureMap& map, const nn::Tensor<T>& pred,
                        double threshold = 0.5) {
  require(pred.numel() == std::int64_t(map.occupancy.size()), errc::shape_mismatch,
          "prediction grid does not match the map");
  render::FeatureMap out = map;
  for (std::size_t i = 0; i < out.occupancy.size(); ++i) {
    if (!out.occupancy[i]) continue;
    const double p = (double(pred.v[i]) + 1.0) / 2.0;
    if (p < threshold) out.clear_cell(i);
  }
  return out;
}

inline render::FeatureMap cull_by_mask(const render::FeatureMap& map,
                                       const geom::VisibilityMask& mask) {
  require(mask.height == map.height && mask.width == map.width, errc::dimension_mismatch,
          "mask does not match the map");
  render::FeatureMap out = map;
  for (std::size_t i = 0; i < out.occupancy.size(); ++i)
    if (out.occupancy[i] && mask.state[i] == std::uint8_t(geom::Vis::occluded)) out.clear_cell(i);
  return out;
}

template <typename T>
nn::Tensor<T> forward_coarsenet(UNet<T>& net, const render::FeatureMap& culled_map) {
  nn::EvalCtx<T> ctx;
  auto out = unet_forward(ctx, net, ctx.input(render::to_tensor(culled_map).template cast<T>()));
  return *out;
}

template <typename T>
nn::Tensor<T> forward_refinenet(UNet<T>& net, const render::FeatureMap& map,
                                const nn::Tensor<T>& coarse_image) {
  nn::EvalCtx<T> ctx;
  auto map_t = ctx.input(render::to_tensor(map).template cast<T>());
  auto input = ctx.concat(map_t, ctx.input(coarse_image));
  return *unet_forward(ctx, net, input);
}

// P(real) for a (map, image) pair.
template <typename T>
double forward_discriminator(Discriminator<T>& disc, FeatureExtractor<T>& fx,
                             const render::FeatureMap& map, const nn::Tensor<T>& image) {
  nn::EvalCtx<T> ctx;
  auto map_t = ctx.input(render::to_tensor(map).template cast<T>());
  auto img = ctx.input(image);
  auto taps = feature_taps(ctx, fx, img);
  auto logits = ctx.softmax(discriminator_logits(ctx, disc, map_t, img, taps));
  return double(ctx.value(logits).v[1]);
}

struct InvertOptions {
  VisibilityMode visibility = VisibilityMode::net;
  double cull_threshold = 0.5;
  const geom::DepthBuffer* mesh_depth = nullptr;  // required for dense mode
};

// Full cascade: cull, coarse, refine; result rescaled from [-1,1] to [0,1].
template <typename T>
Image invert(NetworkBundle<T>& bundle, const render::FeatureMap& map,
             const InvertOptions& opts = {}) {
  render::FeatureMap culled = [&] {
    switch (opts.visibility) {
      case VisibilityMode::implicit: return map;
      case VisibilityMode::sparse: return cull_by_mask(map, geom::visib_sparse(map));
      case VisibilityMode::dense:
        require(opts.mesh_depth != nullptr, errc::invalid_config,
                "dense visibility needs a mesh depth buffer");
        return cull_by_mask(map, geom::visib_dense(map, *opts.mesh_depth));
      case VisibilityMode::net:
        return cull(map, forward_visibnet(bundle.visibnet, map), opts.cull_threshold);
    }
    return map;
  }();
  auto coarse = forward_coarsenet(bundle.coarsenet, culled);
  auto refined = forward_refinenet(bundle.refinenet, culled, coarse);
  return net_to_image(refined);
}

// ---------------------------------------------------------------------------
// checkpointing: trainable parameters plus batch-norm running statistics

template <typename T, class Net>
nn::NamedTensors net_named_tensors(Net& net) {
  nn::NamedTensors out;
  for_each_param(net, [&out](nn::Parameter<T>& p) {
    out.emplace_back(p.name, p.value.template cast<float>());
  });
  for_each_bn(net, [&out](nn::BatchNormLayer<T>& bn) {
    const std::string base = bn.gamma.name.substr(0, bn.gamma.name.size() - 6);  // strip .gamma
    out.emplace_back(base + ".running_mean", bn.running_mean.template cast<float>());
    out.emplace_back(base + ".running_var", bn.running_var.template cast<float>());
  });
  return out;
}

template <typename T, class Net>
void load_net_tensors(Net& net, const std::map<std::string, nn::Tensor<float>>& tensors,
                      const std::string& origin) {
  auto fetch = [&](const std::string& name) -> const nn::Tensor<float>& {
    auto it = tensors.find(name);
    require(it != tensors.end(), errc::malformed_record, origin + ": missing tensor " + name);
    return it->second;
  };
  for_each_param(net, [&](nn::Parameter<T>& p) {
    const auto& t = fetch(p.name);
    require(t.shape == p.value.shape, errc::shape_mismatch, origin + ": shape of " + p.name);
    p.value = t.template cast<T>();
  });
  for_each_bn(net, [&](nn::BatchNormLayer<T>& bn) {
    const std::string base = bn.gamma.name.substr(0, bn.gamma.name.size() - 6);
    bn.running_mean = fetch(base + ".running_mean").template cast<T>();
    bn.running_var = fetch(base + ".running_var").template cast<T>();
  });
}

}  // namespace sfminv::nets
