#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sfminv/nn/graph.hpp"
#include "sfminv/nn/tensor.hpp"

namespace sfminv::nn {

// Adam with bias correction. Moments are keyed by parameter name so the
// state can ride along in checkpoints.
template <typename T>
class Adam {
 public:
  struct Config {
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
  };

  Adam() = default;
  explicit Adam(Config cfg) : cfg_(cfg) {}

  void step(const std::vector<Parameter<T>*>& params) {
    ++step_count_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, T(step_count_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, T(step_count_));
    for (auto* p : params) {
      if (!p->trainable) continue;
      auto& m = moments_[p->name];
      if (m.m.numel() == 0) {
        m.m = Tensor<T>(p->value.shape);
        m.v = Tensor<T>(p->value.shape);
      }
      for (std::size_t i = 0; i < p->value.v.size(); ++i) {
        const T g = p->grad.v[i];
        m.m.v[i] = cfg_.beta1 * m.m.v[i] + (T(1) - cfg_.beta1) * g;
        m.v.v[i] = cfg_.beta2 * m.v.v[i] + (T(1) - cfg_.beta2) * g * g;
        const T mhat = m.m.v[i] / bc1;
        const T vhat = m.v.v[i] / bc2;
        p->value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }
  Config& config() { return cfg_; }
  const Config& config() const { return cfg_; }

  // State tensors for checkpointing, names derived from parameter names.
  std::vector<std::pair<std::string, const Tensor<T>*>> state_tensors() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (const auto& [name, m] : moments_) {
      out.emplace_back(name + ".adam_m", &m.m);
      out.emplace_back(name + ".adam_v", &m.v);
    }
    return out;
  }

  void load_state(const std::string& name, Tensor<T> t) {
    if (name.ends_with(".adam_m"))
      moments_[name.substr(0, name.size() - 7)].m = std::move(t);
    else if (name.ends_with(".adam_v"))
      moments_[name.substr(0, name.size() - 7)].v = std::move(t);
  }

 private:
  struct Moments {
    Tensor<T> m, v;
  };
  Config cfg_;
  std::int64_t step_count_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace sfminv::nn
