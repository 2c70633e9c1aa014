#pragma once

// The shared encoder-decoder backbone of VisibNet, CoarseNet and RefineNet.
// Encoder: six 4x4 stride-2 conv stages (256,256,256,512,512,512), each with
// batch norm and ReLU. Decoder: six upsample+3x3 conv stages
// (512,512,512,256,256,256) followed by four dimension-preserving 3x3 convs
// (128,64,32,out). Encoder outputs at H/2..H/32 are concatenated to the
// equal-resolution decoder inputs; the bottleneck feeds the first decoder
// stage directly; the trailing convs take no skips. The final conv has no
// batch norm and a tanh output. The three nets differ only in channel counts
// at the ends and in the decoder activation.

#include <string>
#include <vector>

#include "sfminv/nn/layers.hpp"

namespace sfminv::nets {

enum class DecoderAct { relu, leaky_relu };

constexpr float kLeakySlope = 0.2f;

template <typename T>
struct UNet {
  int in_channels = 0, out_channels = 0;
  DecoderAct decoder_act = DecoderAct::relu;
  std::vector<nn::ConvLayer<T>> enc_conv;      // 6
  std::vector<nn::BatchNormLayer<T>> enc_bn;   // 6
  std::vector<nn::ConvLayer<T>> dec_conv;      // 10
  std::vector<nn::BatchNormLayer<T>> dec_bn;   // 9, final stage has none
};

// Channel plan shared by every UNet in the cascade.
inline std::vector<std::pair<int, int>> unet_encoder_channels(int in) {
  return {{in, 256}, {256, 256}, {256, 256}, {256, 512}, {512, 512}, {512, 512}};
}

inline std::vector<std::pair<int, int>> unet_decoder_channels(int out) {
  return {{512, 512},  {1024, 512}, {1024, 512}, {768, 256}, {512, 256},
          {512, 256},  {256, 128},  {128, 64},   {64, 32},   {32, out}};
}

template <typename T>
UNet<T> build_unet(const std::string& prefix, int in_channels, int out_channels,
                   DecoderAct act, Rng& rng) {
  UNet<T> net;
  net.in_channels = in_channels;
  net.out_channels = out_channels;
  net.decoder_act = act;
  int i = 0;
  for (auto [ci, co] : unet_encoder_channels(in_channels)) {
    const std::string name = prefix + ".enc" + std::to_string(++i);
    net.enc_conv.push_back(nn::ConvLayer<T>::make(name, ci, co, 4, 2, 1, rng));
    net.enc_bn.push_back(nn::BatchNormLayer<T>::make(name + ".bn", co, rng));
  }
  i = 0;
  for (auto [ci, co] : unet_decoder_channels(out_channels)) {
    const std::string name = prefix + ".dec" + std::to_string(++i);
    net.dec_conv.push_back(nn::ConvLayer<T>::make(name, ci, co, 3, 1, 1, rng));
    // the final conv runs without batch norm
    if (i <= 9) net.dec_bn.push_back(nn::BatchNormLayer<T>::make(name + ".bn", co, rng));
  }
  return net;
}

template <typename T, class Ctx>
typename Ctx::H unet_forward(Ctx& ctx, UNet<T>& net, typename Ctx::H x) {
  const auto& in = ctx.value(x);
  require(in.rank() == 4 && in.size(1) == net.in_channels, errc::shape_mismatch,
          "unet input " + nn::shape_str(in.shape));
  require(in.size(2) % 64 == 0 && in.size(3) % 64 == 0 && in.size(2) > 0 && in.size(3) > 0,
          errc::bad_dimensions, "unet input dims must be positive multiples of 64");

  std::vector<typename Ctx::H> skips;
  auto h = x;
  for (std::size_t i = 0; i < net.enc_conv.size(); ++i) {
    h = ctx.relu(ctx.bn(net.enc_bn[i], ctx.conv(net.enc_conv[i], h)));
    skips.push_back(h);
  }
  for (std::size_t j = 0; j < net.dec_conv.size(); ++j) {
    const bool upsampling = j < 6;
    if (upsampling && j >= 1) h = ctx.concat(h, skips[5 - j]);
    if (upsampling) h = ctx.upsample2x(h);
    h = ctx.conv(net.dec_conv[j], h);
    if (j + 1 < net.dec_conv.size()) {
      h = ctx.bn(net.dec_bn[j], h);
      h = net.decoder_act == DecoderAct::relu ? ctx.relu(h) : ctx.leaky_relu(h, T(kLeakySlope));
    } else {
      h = ctx.tanh_(h);
    }
  }
  return h;
}

template <typename T, class Fn>
void for_each_param(UNet<T>& net, Fn&& fn) {
  for (auto& l : net.enc_conv) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : net.enc_bn) {
    fn(l.gamma);
    fn(l.beta);
  }
  for (auto& l : net.dec_conv) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : net.dec_bn) {
    fn(l.gamma);
    fn(l.beta);
  }
}

template <typename T, class Fn>
void for_each_bn(UNet<T>& net, Fn&& fn) {
  for (auto& l : net.enc_bn) fn(l);
  for (auto& l : net.dec_bn) fn(l);
}

template <typename T>
std::int64_t parameter_count(UNet<T>& net) {
  std::int64_t n = 0;
  for_each_param(net, [&n](nn::Parameter<T>& p) { n += p.value.numel(); });
  return n;
}

template <typename T>
std::vector<nn::Parameter<T>*> parameters(UNet<T>& net) {
  std::vector<nn::Parameter<T>*> out;
  for_each_param(net, [&out](nn::Parameter<T>& p) { out.push_back(&p); });
  return out;
}

}  // namespace sfminv::nets
