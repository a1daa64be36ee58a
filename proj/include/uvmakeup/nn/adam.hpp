#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "uvmakeup/nn/layers.hpp"

namespace uvmakeup::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam(ParameterList<T> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
      m_.emplace(p.name, Tensor<T>(p.var.shape()));
      v_.emplace(p.name, Tensor<T>(p.var.shape()));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  /// Parameters without a gradient this step are left untouched.
  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (auto& p : params_) {
      if (!p.var.has_grad()) continue;
      Tensor<T>& m = m_.at(p.name);
      Tensor<T>& v = v_.at(p.name);
      Tensor<T>& w = p.var.mutable_value();
      const Tensor<T>& g = p.var.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = T(config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i]);
        v[i] = T(config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i]);
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        w[i] -= T(config_.lr * mh / (std::sqrt(vh) + config_.eps));
      }
    }
  }

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }

  /// Moment buffers keyed "m/<param>" and "v/<param>" for checkpointing.
  std::map<std::string, Tensor<T>> state() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, t] : m_) out.emplace("m/" + name, t);
    for (const auto& [name, t] : v_) out.emplace("v/" + name, t);
    return out;
  }

  void load_state(const std::map<std::string, Tensor<T>>& state, std::uint64_t steps) {
    for (auto& [name, t] : m_) {
      if (auto it = state.find("m/" + name); it != state.end() && it->second.shape() == t.shape())
        t = it->second;
    }
    for (auto& [name, t] : v_) {
      if (auto it = state.find("v/" + name); it != state.end() && it->second.shape() == t.shape())
        t = it->second;
    }
    steps_ = steps;
  }

 private:
  ParameterList<T> params_;
  AdamConfig config_;
  std::map<std::string, Tensor<T>> m_;
  std::map<std::string, Tensor<T>> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace uvmakeup::nn
