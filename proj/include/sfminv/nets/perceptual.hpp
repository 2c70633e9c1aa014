#pragma once

// Fixed feature extractor providing the three perceptual taps
// phi1: H/2 x W/2 x 64, phi2: H/4 x W/4 x 128, phi3: H/8 x W/8 x 256 on RGB
// input in [-1,1]. Weights are frozen for the lifetime of every training
// stage: by default a seeded random pyramid, optionally loaded from a
// checkpoint with externally converted weights (e.g. a VGG16 distillation).
// Losses and gradients flow through it, never into it.

#include <array>

#include "sfminv/nn/checkpoint.hpp"
#include "sfminv/nn/layers.hpp"

namespace sfminv::nets {

template <typename T>
struct FeatureExtractor {
  nn::ConvLayer<T> pre;    // 3 -> 32, 3x3 s1
  nn::ConvLayer<T> down1;  // 32 -> 64, 4x4 s2
  nn::ConvLayer<T> down2;  // 64 -> 128, 4x4 s2
  nn::ConvLayer<T> down3;  // 128 -> 256, 4x4 s2
};

template <typename T>
FeatureExtractor<T> build_feature_extractor(Rng& rng) {
  FeatureExtractor<T> fx;
  fx.pre = nn::ConvLayer<T>::make("fx.pre", 3, 32, 3, 1, 1, rng);
  fx.down1 = nn::ConvLayer<T>::make("fx.down1", 32, 64, 4, 2, 1, rng);
  fx.down2 = nn::ConvLayer<T>::make("fx.down2", 64, 128, 4, 2, 1, rng);
  fx.down3 = nn::ConvLayer<T>::make("fx.down3", 128, 256, 4, 2, 1, rng);
  for (auto* p : {&fx.pre.w, &fx.pre.b, &fx.down1.w, &fx.down1.b, &fx.down2.w, &fx.down2.b,
                  &fx.down3.w, &fx.down3.b})
    p->trainable = false;
  return fx;
}

template <typename T, class Ctx>
std::array<typename Ctx::H, 3> feature_taps(Ctx& ctx, FeatureExtractor<T>& fx,
                                            typename Ctx::H image) {
  auto h = ctx.relu(ctx.conv(fx.pre, image));
  auto t1 = ctx.relu(ctx.conv(fx.down1, h));
  auto t2 = ctx.relu(ctx.conv(fx.down2, t1));
  auto t3 = ctx.relu(ctx.conv(fx.down3, t2));
  return {t1, t2, t3};
}

template <typename T, class Fn>
void for_each_param(FeatureExtractor<T>& fx, Fn&& fn) {
  for (auto* l : {&fx.pre, &fx.down1, &fx.down2, &fx.down3}) {
    fn(l->w);
    fn(l->b);
  }
}

template <typename T, class Fn>
void for_each_bn(FeatureExtractor<T>&, Fn&&) {}  // no batch norm layers

template <typename T>
void load_feature_extractor(FeatureExtractor<T>& fx, const std::string& checkpoint_path) {
  auto tensors = nn::load_tensors(checkpoint_path);
  for_each_param(fx, [&](nn::Parameter<T>& p) {
    auto it = tensors.find(p.name);
    require(it != tensors.end(), errc::malformed_record,
            checkpoint_path + ": missing tensor " + p.name);
    require(it->second.shape == p.value.shape, errc::shape_mismatch,
            checkpoint_path + ": shape mismatch for " + p.name);
    p.value = it->second.template cast<T>();
  });
}

}  // namespace sfminv::nets
