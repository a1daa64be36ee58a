#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/nn/checkpoint.hpp"
#include "uvmakeup/nn/layers.hpp"

namespace uvmakeup::color {

/// Frozen feature network used by the perceptual loss.
template <class T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual nn::Var<T> operator()(const nn::Var<T>& x) const = 0;
  virtual std::string name() const = 0;
};

struct FeatureLayer {
  enum class Kind { conv, relu, maxpool };
  Kind kind = Kind::conv;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
};

/// Sequential conv/relu/maxpool stack with fixed weights. Built either from a
/// seed (random He-normal weights, the offline default) or from a checkpoint
/// of kind "features" whose metadata lists the layers and input normalization
/// and whose tensors hold "layer<i>.weight" / "layer<i>.bias".
template <class T>
class ConvFeatureStack final : public FeatureExtractor<T> {
 public:
  static std::vector<FeatureLayer> default_layers() {
    using K = FeatureLayer::Kind;
    return {{K::conv, 16, 3, 2}, {K::relu}, {K::conv, 32, 3, 2}, {K::relu}};
  }

  explicit ConvFeatureStack(std::uint64_t seed, std::vector<FeatureLayer> layers = default_layers())
      : layers_(std::move(layers)), mean_{0.5, 0.5, 0.5}, std_{0.25, 0.25, 0.25}, name_("random-conv") {
    Rng rng = make_rng(seed, 0xFEA7);
    int in = 3;
    for (const auto& l : layers_) {
      if (l.kind != FeatureLayer::Kind::conv) {
        weights_.emplace_back();
        biases_.emplace_back();
        continue;
      }
      nn::Tensor<T> w(nn::Shape{l.out_channels, in, l.kernel, l.kernel});
      const double sd = std::sqrt(2.0 / (in * l.kernel * l.kernel));
      for (auto& v : w.values()) v = static_cast<T>(normal(rng) * sd);
      weights_.emplace_back(std::move(w));
      biases_.emplace_back();
      in = l.out_channels;
    }
  }

  static ConvFeatureStack from_checkpoint(const nn::Checkpoint& ck) {
    require(ck.kind == "features", ErrorCategory::checkpoint, "feature checkpoint has kind " + ck.kind);
    ConvFeatureStack out;
    out.name_ = ck.metadata.value("name", std::string("loaded"));
    out.mean_ = ck.metadata.value("mean", std::vector<double>{0.0, 0.0, 0.0});
    out.std_ = ck.metadata.value("std", std::vector<double>{1.0, 1.0, 1.0});
    require(out.mean_.size() == 3 && out.std_.size() == 3, ErrorCategory::checkpoint,
            "feature normalization needs 3 channels");
    const auto& layers = ck.metadata.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string kind = l.at("type").get<std::string>();
      FeatureLayer fl;
      if (kind == "conv") {
        const auto wt = ck.tensors.find("layer" + std::to_string(i) + ".weight");
        require(wt != ck.tensors.end(), ErrorCategory::checkpoint,
                "missing weight for feature layer " + std::to_string(i));
        fl.kind = FeatureLayer::Kind::conv;
        fl.out_channels = wt->second.shape().n;
        fl.kernel = wt->second.shape().h;
        fl.stride = l.value("stride", 1);
        out.weights_.emplace_back(wt->second.template cast<T>());
        const auto bt = ck.tensors.find("layer" + std::to_string(i) + ".bias");
        out.biases_.emplace_back(bt == ck.tensors.end() ? nn::Tensor<T>() : bt->second.template cast<T>());
      } else if (kind == "relu" || kind == "maxpool") {
        fl.kind = kind == "relu" ? FeatureLayer::Kind::relu : FeatureLayer::Kind::maxpool;
        out.weights_.emplace_back();
        out.biases_.emplace_back();
      } else {
        fail(ErrorCategory::checkpoint, "unknown feature layer type " + kind);
      }
      out.layers_.push_back(fl);
    }
    return out;
  }

  nn::Var<T> operator()(const nn::Var<T>& x) const override {
    std::vector<T> a(3);
    std::vector<T> b(3);
    for (int c = 0; c < 3; ++c) {
      a[c] = T(1.0 / std_[c]);
      b[c] = T(-mean_[c] / std_[c]);
    }
    nn::Var<T> y = nn::affine_channels(x, a, b);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      switch (layers_[i].kind) {
        case FeatureLayer::Kind::conv: {
          const nn::Var<T> w(weights_[i]);
          const nn::Var<T> bias = biases_[i].defined() ? nn::Var<T>(biases_[i]) : nn::Var<T>();
          y = nn::conv2d(y, w, bias, layers_[i].stride, layers_[i].kernel / 2);
          break;
        }
        case FeatureLayer::Kind::relu: y = nn::relu(y); break;
        case FeatureLayer::Kind::maxpool: y = nn::maxpool2x(y); break;
      }
    }
    return y;
  }

  std::string name() const override { return name_; }

 private:
  ConvFeatureStack() = default;

  std::vector<FeatureLayer> layers_;
  std::vector<nn::Tensor<T>> weights_;
  std::vector<nn::Tensor<T>> biases_;
  std::vector<double> mean_;
  std::vector<double> std_;
  std::string name_;
};

/// Mean squared distance between features of the input and of the output.
template <class T>
nn::Var<T> per_loss(const FeatureExtractor<T>& features, const nn::Tensor<T>& input,
                    const nn::Var<T>& output) {
  nn::Tensor<T> target;
  {
    nn::NoGradGuard guard;
    target = features(nn::Var<T>(input)).value();
  }
  return nn::mse_loss(features(output), target);
}

}  // namespace uvmakeup::color
