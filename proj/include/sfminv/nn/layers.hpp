#pragma once

// Layer building blocks shared by the networks, plus the two forward
// contexts: TapeCtx records onto an autodiff Graph for training, EvalCtx
// runs raw kernels with batch-norm in inference mode and lets activations
// free as soon as the last handle drops. Network forward passes are written
// once, templated over the context.

#include <memory>
#include <string>
#include <vector>

#include "sfminv/nn/graph.hpp"
#include "sfminv/nn/init.hpp"
#include "sfminv/nn/ops.hpp"

namespace sfminv::nn {

enum class Init { xavier, zeros, ones };

template <typename T>
Parameter<T> make_param(std::string name, Shape shape, Init init, Rng& rng) {
  Tensor<T> value;
  switch (init) {
    case Init::xavier: value = xavier_init<T>(std::move(shape), rng); break;
    case Init::zeros: value = Tensor<T>(std::move(shape)); break;
    case Init::ones:
      value = Tensor<T>(std::move(shape));
      value.fill(T(1));
      break;
  }
  Parameter<T> p(std::move(name), std::move(value));
  return p;
}

template <typename T>
struct ConvLayer {
  Parameter<T> w, b;
  int stride = 1, pad = 1;

  static ConvLayer make(const std::string& name, std::int64_t ci, std::int64_t co, int k,
                        int stride, int pad, Rng& rng) {
    ConvLayer l;
    l.w = make_param<T>(name + ".w", {co, ci, k, k}, Init::xavier, rng);
    l.b = make_param<T>(name + ".b", {co}, Init::zeros, rng);
    l.stride = stride;
    l.pad = pad;
    return l;
  }
};

template <typename T>
struct BatchNormLayer {
  Parameter<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T momentum = T(0.9), eps = T(1e-5);

  static BatchNormLayer make(const std::string& name, std::int64_t c, Rng& rng) {
    BatchNormLayer l;
    l.gamma = make_param<T>(name + ".gamma", {c}, Init::ones, rng);
    l.beta = make_param<T>(name + ".beta", {c}, Init::zeros, rng);
    l.running_mean = Tensor<T>({c});
    l.running_var = Tensor<T>({c});
    l.running_var.fill(T(1));
    return l;
  }
};

template <typename T>
struct FcLayer {
  Parameter<T> w, b;

  static FcLayer make(const std::string& name, std::int64_t in, std::int64_t out, Rng& rng) {
    FcLayer l;
    l.w = make_param<T>(name + ".w", {out, in}, Init::xavier, rng);
    l.b = make_param<T>(name + ".b", {out}, Init::zeros, rng);
    return l;
  }
};

// ---------------------------------------------------------------------------

template <typename T>
struct TapeCtx {
  Graph<T>* g;
  ops::BnMode bn_mode = ops::BnMode::train;

  using H = Var;

  H input(Tensor<T> t, bool needs_grad = false) { return g->input(std::move(t), needs_grad); }
  H conv(ConvLayer<T>& l, H x) { return g->conv2d(x, l.w, l.b, l.stride, l.pad); }
  H bn(BatchNormLayer<T>& l, H x) {
    return g->batchnorm(x, l.gamma, l.beta, l.running_mean, l.running_var, bn_mode, l.momentum,
                        l.eps);
  }
  H fc(FcLayer<T>& l, H x) { return g->fc(x, l.w, l.b); }
  H relu(H x) { return g->relu(x); }
  H leaky_relu(H x, T slope) { return g->leaky_relu(x, slope); }
  H tanh_(H x) { return g->tanh_(x); }
  H softmax(H x) { return g->softmax(x); }
  H upsample2x(H x) { return g->upsample2x(x); }
  H maxpool2x2(H x) { return g->maxpool2x2(x); }
  H concat(H a, H b) { return g->concat(a, b); }
  H flatten(H x) { return g->flatten(x); }
  const Tensor<T>& value(H x) const { return g->val(x); }
};

template <typename T>
struct EvalCtx {
  // When set, batch norm normalizes with the current batch statistics but
  // leaves the running estimates untouched (used for discriminator passes
  // that must not mutate frozen state).
  bool bn_batch_stats = false;

  using H = std::shared_ptr<Tensor<T>>;

  H input(Tensor<T> t, bool = false) { return std::make_shared<Tensor<T>>(std::move(t)); }
  H conv(ConvLayer<T>& l, H x) {
    return wrap(ops::conv2d_forward(*x, l.w.value, l.b.value, l.stride, l.pad));
  }
  H bn(BatchNormLayer<T>& l, H x) {
    auto mode = bn_batch_stats ? ops::BnMode::train_no_update : ops::BnMode::eval;
    return wrap(ops::batchnorm_forward(*x, l.gamma.value, l.beta.value, l.running_mean,
                                       l.running_var, mode, l.momentum, l.eps, nullptr));
  }
  H fc(FcLayer<T>& l, H x) { return wrap(ops::fc_forward(*x, l.w.value, l.b.value)); }
  H relu(H x) { return wrap(ops::relu_forward(*x)); }
  H leaky_relu(H x, T slope) { return wrap(ops::leaky_relu_forward(*x, slope)); }
  H tanh_(H x) { return wrap(ops::tanh_forward(*x)); }
  H softmax(H x) { return wrap(ops::softmax_forward(*x)); }
  H upsample2x(H x) { return wrap(ops::upsample2x_forward(*x)); }
  H maxpool2x2(H x) { return wrap(ops::maxpool2x2_forward(*x, nullptr)); }
  H concat(H a, H b) { return wrap(ops::concat_channels_forward(*a, *b)); }
  H flatten(H x) { return wrap(x->reshaped({x->size(0), x->numel() / x->size(0)})); }
  const Tensor<T>& value(H x) const { return *x; }

 private:
  H wrap(Tensor<T> t) { return std::make_shared<Tensor<T>>(std::move(t)); }
};

// ---------------------------------------------------------------------------

// FNV-1a over the raw parameter bytes, in list order. Used to verify that
// frozen networks stay untouched across training stages.
template <typename T>
std::uint64_t checksum(const std::vector<Parameter<T>*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto* p : params) mix(p->value.v.data(), p->value.v.size() * sizeof(T));
  return h;
}

}  // namespace sfminv::nn
