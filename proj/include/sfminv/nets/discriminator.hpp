#pragma once

// Conditional discriminator: CA256-CA256-CA256-CA512-CA512-CA512 followed by
// FC1024-FC1024-FC1024-FC2, where CA is a 3x3 stride-1 conv, 2x2 max pool,
// batch norm and leaky ReLU, and the final layer feeds a softmax. It judges
// (feature map, image) pairs; the perceptual taps of the judged image are
// concatenated where their resolution matches: phi1 (H/2) before stage 2,
// phi2 (H/4) before stage 3, phi3 (H/8) before stage 4. The fully connected
// sizes bind the net to its build resolution.

#include <array>
#include <string>
#include <vector>

#include "sfminv/nets/unet.hpp"
#include "sfminv/nn/layers.hpp"

namespace sfminv::nets {

template <typename T>
struct Discriminator {
  int in_channels = 0;  // schema channels + 3 image channels
  int input_h = 0, input_w = 0;
  std::vector<nn::ConvLayer<T>> conv;     // 6
  std::vector<nn::BatchNormLayer<T>> bn;  // 6
  std::vector<nn::FcLayer<T>> fc;         // 4
};

template <typename T>
Discriminator<T> build_discriminator(const std::string& prefix, int map_channels, int input_h,
                                     int input_w, Rng& rng) {
  require(input_h % 64 == 0 && input_w % 64 == 0 && input_h > 0 && input_w > 0,
          errc::bad_dimensions, "discriminator input dims must be positive multiples of 64");
  Discriminator<T> d;
  d.in_channels = map_channels + 3;
  d.input_h = input_h;
  d.input_w = input_w;
  // taps of the judged image enter at matching resolutions
  const std::array<std::pair<int, int>, 6> channels = {{{d.in_channels, 256},
                                                        {256 + 64, 256},
                                                        {256 + 128, 256},
                                                        {256 + 256, 512},
                                                        {512, 512},
                                                        {512, 512}}};
  for (int i = 0; i < 6; ++i) {
    const std::string name = prefix + ".conv" + std::to_string(i + 1);
    d.conv.push_back(
        nn::ConvLayer<T>::make(name, channels[std::size_t(i)].first,
                               channels[std::size_t(i)].second, 3, 1, 1, rng));
    d.bn.push_back(
        nn::BatchNormLayer<T>::make(name + ".bn", channels[std::size_t(i)].second, rng));
  }
  const std::int64_t flat = 512 * std::int64_t(input_h / 64) * (input_w / 64);
  d.fc.push_back(nn::FcLayer<T>::make(prefix + ".fc1", flat, 1024, rng));
  d.fc.push_back(nn::FcLayer<T>::make(prefix + ".fc2", 1024, 1024, rng));
  d.fc.push_back(nn::FcLayer<T>::make(prefix + ".fc3", 1024, 1024, rng));
  d.fc.push_back(nn::FcLayer<T>::make(prefix + ".fc4", 1024, 2, rng));
  return d;
}

// Returns the two class logits (N, 2); softmax index 1 is P(real).
template <typename T, class Ctx>
typename Ctx::H discriminator_logits(Ctx& ctx, Discriminator<T>& d, typename Ctx::H map,
                                     typename Ctx::H image,
                                     const std::array<typename Ctx::H, 3>& taps) {
  const auto& m = ctx.value(map);
  require(m.size(2) == d.input_h && m.size(3) == d.input_w, errc::shape_mismatch,
          "discriminator built for " + std::to_string(d.input_h) + "x" +
              std::to_string(d.input_w) + ", got " + nn::shape_str(m.shape));
  auto h = ctx.concat(map, image);
  for (int i = 0; i < 6; ++i) {
    if (i >= 1 && i <= 3) h = ctx.concat(h, taps[std::size_t(i - 1)]);
    h = ctx.conv(d.conv[std::size_t(i)], h);
    h = ctx.maxpool2x2(h);
    h = ctx.bn(d.bn[std::size_t(i)], h);
    h = ctx.leaky_relu(h, T(kLeakySlope));
  }
  h = ctx.flatten(h);
  for (int i = 0; i < 3; ++i) h = ctx.leaky_relu(ctx.fc(d.fc[std::size_t(i)], h), T(kLeakySlope));
  return ctx.fc(d.fc[3], h);
}

template <typename T, class Fn>
void for_each_param(Discriminator<T>& d, Fn&& fn) {
  for (auto& l : d.conv) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : d.bn) {
    fn(l.gamma);
    fn(l.beta);
  }
  for (auto& l : d.fc) {
    fn(l.w);
    fn(l.b);
  }
}

template <typename T, class Fn>
void for_each_bn(Discriminator<T>& d, Fn&& fn) {
  for (auto& l : d.bn) fn(l);
}

template <typename T>
std::int64_t parameter_count(Discriminator<T>& d) {
  std::int64_t n = 0;
  for_each_param(d, [&n](nn::Parameter<T>& p) { n += p.value.numel(); });
  return n;
}

template <typename T>
std::vector<nn::Parameter<T>*> parameters(Discriminator<T>& d) {
  std::vector<nn::Parameter<T>*> out;
  for_each_param(d, [&out](nn::Parameter<T>& p) { out.push_back(&p); });
  return out;
}

}  // namespace sfminv::nets
