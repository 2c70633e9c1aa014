#pragma once

// Training objectives. The visibility loss is a masked cross entropy summed
// over occupied cells; the reconstruction losses combine a pixel L1 mean
// with a perceptual L2 over the extractor taps; the adversarial pieces are
// assembled in the trainer from discriminator logits. Batched variants take
// the mean over the batch of per-sample values.

#include <vector>

#include "sfminv/geom/visibility.hpp"
#include "sfminv/nets/perceptual.hpp"
#include "sfminv/nn/graph.hpp"

namespace sfminv::nets {

// -sum over occupied cells of [U log((V+1)/2) + (1-U) log((1-V)/2)],
// averaged over the batch; pred is (B,1,H,W) in (-1,1).
template <typename T>
nn::Var loss_visib(nn::Graph<T>& g, nn::Var pred,
                   const std::vector<const geom::VisibilityMask*>& masks) {
  const auto& p = g.val(pred);
  require(p.rank() == 4 && p.size(1) == 1, errc::shape_mismatch, "visibility pred shape");
  require(std::int64_t(masks.size()) == p.size(0), errc::shape_mismatch,
          "mask count vs batch size");
  const std::size_t cells = std::size_t(p.size(2) * p.size(3));
  std::vector<std::uint8_t> labels(masks.size() * cells), occupied(masks.size() * cells);
  for (std::size_t b = 0; b < masks.size(); ++b) {
    const auto& m = *masks[b];
    require(std::size_t(m.height) * std::size_t(m.width) == cells, errc::dimension_mismatch,
            "mask dims vs prediction");
    for (std::size_t i = 0; i < cells; ++i) {
      occupied[b * cells + i] = m.state[i] != std::uint8_t(geom::Vis::unoccupied);
      labels[b * cells + i] = m.state[i] == std::uint8_t(geom::Vis::visible);
    }
  }
  return g.masked_tanh_bce(pred, std::move(labels), std::move(occupied));
}

// alpha * sum over the three taps of mean((phi_i(out) - phi_i(target))^2).
// Gradients flow through the taps of `out` only; target taps are constants.
template <typename T>
nn::Var perceptual_term(nn::Graph<T>& g, FeatureExtractor<T>& fx, nn::Var out, nn::Var target) {
  nn::TapeCtx<T> ctx{&g, nn::ops::BnMode::eval};
  auto out_taps = feature_taps(ctx, fx, out);
  auto tgt_taps = feature_taps(ctx, fx, target);
  nn::Var acc = g.sqdiff_mean(out_taps[0], tgt_taps[0]);
  acc = g.add(acc, g.sqdiff_mean(out_taps[1], tgt_taps[1]));
  acc = g.add(acc, g.sqdiff_mean(out_taps[2], tgt_taps[2]));
  return acc;
}

// ||out - target||_1 (mean) + alpha * perceptual term.
template <typename T>
nn::Var loss_coarse(nn::Graph<T>& g, FeatureExtractor<T>& fx, nn::Var out, nn::Var target,
                    T alpha) {
  auto l1 = g.l1_mean(out, target);
  if (alpha == T(0)) return l1;
  return g.add(l1, g.scale(perceptual_term(g, fx, out, target), alpha));
}

// ---------------------------------------------------------------------------
// value-only conveniences (no gradients), used by evaluation paths and tests

template <typename T>
T loss_visib_value(const nn::Tensor<T>& pred, const geom::VisibilityMask& mask) {
  nn::Graph<T> g;
  auto p = g.input(pred.rank() == 4 ? pred : pred.reshaped({1, 1, mask.height, mask.width}));
  return g.scalar(loss_visib(g, p, {&mask}));
}

template <typename T>
T loss_coarse_value(const nn::Tensor<T>& out, const nn::Tensor<T>& target, FeatureExtractor<T>& fx,
                    T alpha) {
  nn::Graph<T> g;
  return g.scalar(loss_coarse(g, fx, g.input(out), g.input(target), alpha));
}

}  // namespace sfminv::nets
