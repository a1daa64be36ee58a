#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/nn/ops.hpp"

namespace uvmakeup::nn {

template <class T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

template <class T>
using ParameterList = std::vector<NamedParameter<T>>;

template <class T>
Var<T> parameter(Tensor<T> value) {
  return Var<T>(std::move(value), true);
}

/// He-normal initialised convolution with bias.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, Rng& rng,
         double gain = 1.0, bool bias = true)
      : stride_(stride), pad_(kernel / 2) {
    Tensor<T> w(Shape{out_channels, in_channels, kernel, kernel});
    const double std = gain * std::sqrt(2.0 / (in_channels * kernel * kernel));
    for (auto& v : w.values()) v = static_cast<T>(normal(rng) * std);
    weight_ = parameter(std::move(w));
    if (bias) bias_ = parameter(Tensor<T>(Shape{1, out_channels, 1, 1}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

  void collect(const std::string& prefix, ParameterList<T>& out) const {
    out.push_back({prefix + ".weight", weight_});
    if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
  }

  int out_channels() const { return weight_.shape().n; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  int stride_ = 1;
  int pad_ = 0;
};

template <class T>
class InstanceNorm2d {
 public:
  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int channels)
      : gamma_(parameter(Tensor<T>(Shape{1, channels, 1, 1}, T(1)))),
        beta_(parameter(Tensor<T>(Shape{1, channels, 1, 1}))) {}

  Var<T> operator()(const Var<T>& x) const { return instance_norm(x, gamma_, beta_); }

  void collect(const std::string& prefix, ParameterList<T>& out) const {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

 private:
  Var<T> gamma_;
  Var<T> beta_;
};

/// Conv -> InstanceNorm -> activation.
template <class T>
class ConvBlock {
 public:
  enum class Act { relu, leaky, none };

  ConvBlock() = default;
  ConvBlock(int in, int out, int kernel, int stride, Rng& rng, Act act = Act::relu,
            bool norm = true)
      : conv_(in, out, kernel, stride, rng, 1.0, !norm), act_(act), has_norm_(norm) {
    if (norm) norm_ = InstanceNorm2d<T>(out);
  }

  Var<T> operator()(const Var<T>& x) const {
    Var<T> y = conv_(x);
    if (has_norm_) y = norm_(y);
    switch (act_) {
      case Act::relu: return relu(y);
      case Act::leaky: return leaky_relu(y);
      case Act::none: return y;
    }
    return y;
  }

  void collect(const std::string& prefix, ParameterList<T>& out) const {
    conv_.collect(prefix + ".conv", out);
    if (has_norm_) norm_.collect(prefix + ".norm", out);
  }

 private:
  Conv2d<T> conv_;
  InstanceNorm2d<T> norm_;
  Act act_ = Act::relu;
  bool has_norm_ = true;
};

template <class T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(int channels, Rng& rng)
      : a_(channels, channels, 3, 1, rng), b_(channels, channels, 3, 1, rng, ConvBlock<T>::Act::none) {}

  Var<T> operator()(const Var<T>& x) const { return add(x, b_(a_(x))); }

  void collect(const std::string& prefix, ParameterList<T>& out) const {
    a_.collect(prefix + ".a", out);
    b_.collect(prefix + ".b", out);
  }

 private:
  ConvBlock<T> a_;
  ConvBlock<T> b_;
};

}  // namespace uvmakeup::nn
