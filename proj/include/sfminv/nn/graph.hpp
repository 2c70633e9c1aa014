#pragma once

// Reverse-mode autodiff tape. Ops execute eagerly and record a backward
// closure; backward() walks the tape in reverse and accumulates gradients
// into node grads and Parameter grads. One Graph per training step.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sfminv/nn/ops.hpp"
#include "sfminv/nn/tensor.hpp"

namespace sfminv::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.zero(); }
};

using Var = int;

template <typename T>
class Graph {
 public:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // allocated only when needs_grad
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  Var input(Tensor<T> v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, nullptr);
  }

  const Tensor<T>& val(Var i) const { return nodes_[std::size_t(i)].val; }
  Tensor<T>& grad(Var i) { return nodes_[std::size_t(i)].grad; }
  T scalar(Var i) const { return nodes_[std::size_t(i)].val.v[0]; }

  // ---- layers ------------------------------------------------------------

  Var conv2d(Var x, Parameter<T>& w, Parameter<T>& b, int stride, int pad) {
    auto y = ops::conv2d_forward(val(x), w.value, b.value, stride, pad);
    bool ng = needs(x) || w.trainable || b.trainable;
    Var out = push(std::move(y), ng, nullptr);
    if (ng)
      nodes_[std::size_t(out)].back = [this, x, out, &w, &b, stride, pad](Graph& g) {
        Tensor<T>* dx = g.needs(x) ? &g.grad(x) : nullptr;
        ops::conv2d_backward(g.val(x), w.value, g.grad(out), stride, pad, dx,
                             w.trainable ? &w.grad : nullptr, b.trainable ? &b.grad : nullptr);
      };
    return out;
  }

  Var fc(Var x, Parameter<T>& w, Parameter<T>& b) {
    auto y = ops::fc_forward(val(x), w.value, b.value);
    bool ng = needs(x) || w.trainable || b.trainable;
    Var out = push(std::move(y), ng, nullptr);
    if (ng)
      nodes_[std::size_t(out)].back = [this, x, out, &w, &b](Graph& g) {
        Tensor<T>* dx = g.needs(x) ? &g.grad(x) : nullptr;
        ops::fc_backward(g.val(x), w.value, g.grad(out), dx, w.trainable ? &w.grad : nullptr,
                         b.trainable ? &b.grad : nullptr);
      };
    return out;
  }

  Var batchnorm(Var x, Parameter<T>& gamma, Parameter<T>& beta, Tensor<T>& running_mean,
                Tensor<T>& running_var, ops::BnMode mode, T momentum, T eps) {
    auto saved = std::make_shared<ops::BnSaved<T>>();
    auto y = ops::batchnorm_forward(val(x), gamma.value, beta.value, running_mean, running_var,
                                    mode, momentum, eps, saved.get());
    bool ng = needs(x) || gamma.trainable || beta.trainable;
    Var out = push(std::move(y), ng, nullptr);
    if (ng)
      nodes_[std::size_t(out)].back = [this, x, out, &gamma, &beta, &running_mean, &running_var,
                                       mode, eps, saved](Graph& g) {
        Tensor<T>* dx = g.needs(x) ? &g.grad(x) : nullptr;
        Tensor<T>* dg = gamma.trainable ? &gamma.grad : nullptr;
        Tensor<T>* db = beta.trainable ? &beta.grad : nullptr;
        if (mode == ops::BnMode::eval)
          ops::batchnorm_backward_eval(gamma.value, running_var, eps, g.grad(out), dx, dg, db,
                                       g.val(x), running_mean);
        else
          ops::batchnorm_backward(g.val(x), gamma.value, *saved, g.grad(out), dx, dg, db);
      };
    return out;
  }

  // ---- activations ---------------------------------------------------------

  Var relu(Var x) {
    Var out = push(ops::relu_forward(val(x)), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out](Graph& g) {
        ops::relu_backward(g.val(x), g.grad(out), g.grad(x));
      };
    return out;
  }

  Var leaky_relu(Var x, T slope) {
    Var out = push(ops::leaky_relu_forward(val(x), slope), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out, slope](Graph& g) {
        ops::leaky_relu_backward(g.val(x), slope, g.grad(out), g.grad(x));
      };
    return out;
  }

  Var tanh_(Var x) {
    Var out = push(ops::tanh_forward(val(x)), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out](Graph& g) {
        ops::tanh_backward(g.val(out), g.grad(out), g.grad(x));
      };
    return out;
  }

  Var softmax(Var x) {
    Var out = push(ops::softmax_forward(val(x)), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out](Graph& g) {
        ops::softmax_backward(g.val(out), g.grad(out), g.grad(x));
      };
    return out;
  }

  // ---- shape / resampling --------------------------------------------------

  Var upsample2x(Var x) {
    Var out = push(ops::upsample2x_forward(val(x)), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out](Graph& g) {
        ops::upsample2x_backward(g.grad(out), g.grad(x));
      };
    return out;
  }

  Var maxpool2x2(Var x) {
    auto argmax = std::make_shared<std::vector<std::uint8_t>>();
    Var out = push(ops::maxpool2x2_forward(val(x), argmax.get()), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out, argmax](Graph& g) {
        ops::maxpool2x2_backward(*argmax, g.grad(out), g.grad(x));
      };
    return out;
  }

  Var concat(Var a, Var b) {
    Var out = push(ops::concat_channels_forward(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b)) {
      std::int64_t ca = val(a).size(1);
      nodes_[std::size_t(out)].back = [this, a, b, out, ca](Graph& g) {
        ops::concat_channels_backward(g.grad(out), ca, g.needs(a) ? &g.grad(a) : nullptr,
                                      g.needs(b) ? &g.grad(b) : nullptr);
      };
    }
    return out;
  }

  Var flatten(Var x) {
    const auto& v = val(x);
    Tensor<T> y = v.reshaped({v.size(0), v.numel() / v.size(0)});
    Var out = push(std::move(y), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out](Graph& g) {
        auto& dst = g.grad(x);
        const auto& src = g.grad(out);
        for (std::size_t i = 0; i < src.v.size(); ++i) dst.v[i] += src.v[i];
      };
    return out;
  }

  // ---- scalar combinators ----------------------------------------------------

  Var add(Var a, Var b) {
    check_same_shape(val(a), val(b), "graph add");
    Tensor<T> y = val(a);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += val(b).v[i];
    Var out = push(std::move(y), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      nodes_[std::size_t(out)].back = [this, a, b, out](Graph& g) {
        const auto& d = g.grad(out);
        if (g.needs(a))
          for (std::size_t i = 0; i < d.v.size(); ++i) g.grad(a).v[i] += d.v[i];
        if (g.needs(b))
          for (std::size_t i = 0; i < d.v.size(); ++i) g.grad(b).v[i] += d.v[i];
      };
    return out;
  }

  Var scale(Var x, T c) {
    Tensor<T> y = val(x);
    for (auto& v : y.v) v *= c;
    Var out = push(std::move(y), needs(x), nullptr);
    if (needs(x))
      nodes_[std::size_t(out)].back = [this, x, out, c](Graph& g) {
        const auto& d = g.grad(out);
        for (std::size_t i = 0; i < d.v.size(); ++i) g.grad(x).v[i] += c * d.v[i];
      };
    return out;
  }

  // ---- losses ------------------------------------------------------------

  Var l1_mean(Var a, Var b) {
    Var out = push(ops::l1_mean_forward(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      nodes_[std::size_t(out)].back = [this, a, b, out](Graph& g) {
        ops::l1_mean_backward(g.val(a), g.val(b), g.grad(out).v[0],
                              g.needs(a) ? &g.grad(a) : nullptr,
                              g.needs(b) ? &g.grad(b) : nullptr);
      };
    return out;
  }

  Var sqdiff_mean(Var a, Var b) {
    Var out = push(ops::sqdiff_mean_forward(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      nodes_[std::size_t(out)].back = [this, a, b, out](Graph& g) {
        ops::sqdiff_mean_backward(g.val(a), g.val(b), g.grad(out).v[0],
                                  g.needs(a) ? &g.grad(a) : nullptr,
                                  g.needs(b) ? &g.grad(b) : nullptr);
      };
    return out;
  }

  Var masked_tanh_bce(Var pred, std::vector<std::uint8_t> labels, std::vector<std::uint8_t> mask) {
    auto lab = std::make_shared<std::vector<std::uint8_t>>(std::move(labels));
    auto msk = std::make_shared<std::vector<std::uint8_t>>(std::move(mask));
    Var out = push(ops::masked_tanh_bce_forward(val(pred), *lab, *msk), needs(pred), nullptr);
    if (needs(pred))
      nodes_[std::size_t(out)].back = [this, pred, out, lab, msk](Graph& g) {
        ops::masked_tanh_bce_backward(g.val(pred), *lab, *msk, g.grad(out).v[0], g.grad(pred));
      };
    return out;
  }

  Var nll(Var logits, std::vector<int> targets) {
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    Var out = push(ops::nll_forward(val(logits), *tg), needs(logits), nullptr);
    if (needs(logits))
      nodes_[std::size_t(out)].back = [this, logits, out, tg](Graph& g) {
        ops::nll_backward(g.val(logits), *tg, g.grad(out).v[0], g.grad(logits));
      };
    return out;
  }

  // ---- engine --------------------------------------------------------------

  void backward(Var root) {
    auto& r = nodes_[std::size_t(root)];
    require(r.needs_grad, errc::shape_mismatch, "backward from a non-tracked node");
    require(r.val.numel() == 1, errc::shape_mismatch, "backward expects a scalar root");
    r.grad.v[0] = T(1);
    for (std::int64_t i = root; i >= 0; --i) {
      auto& n = nodes_[std::size_t(i)];
      if (n.needs_grad && n.back) n.back(*this);
    }
  }

  bool needs(Var i) const { return nodes_[std::size_t(i)].needs_grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  Var push(Tensor<T> v, bool needs_grad, std::function<void(Graph&)> back) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad = Tensor<T>(n.val.shape);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace sfminv::nn
