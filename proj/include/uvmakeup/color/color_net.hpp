#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/color/features.hpp"
#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/nn/checkpoint.hpp"
#include "uvmakeup/nn/layers.hpp"

namespace uvmakeup::color {

struct ColorNetConfig {
  int uv_size = 256;
  int base_width = 8;
  int down_stages = 3;
  int res_blocks = 4;
  int disc_width = 16;
  int disc_layers = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ColorNetConfig& c);
ColorNetConfig color_net_config_from_json(const nlohmann::json& j, ColorNetConfig base = {});

using Varf = nn::Var<float>;
using ParamsF = nn::ParameterList<float>;

/// Strided encoder; returns the feature map after every stage.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const std::vector<int>& widths, Rng& rng);
  std::vector<Varf> operator()(const Varf& x) const;
  void collect(const std::string& prefix, ParamsF& out) const;

 private:
  std::vector<nn::ConvBlock<float>> stages_;
};

/// Upsampling decoder with skips from one encoder. Emits a 3-channel residual
/// at the encoder's first-stage resolution.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const std::vector<int>& widths, Rng& rng);
  Varf operator()(const Varf& bottleneck, const std::vector<Varf>& skips) const;
  void collect(const std::string& prefix, ParamsF& out) const;

 private:
  std::vector<nn::ConvBlock<float>> stages_;
  nn::Conv2d<float> head_;
};

/// Dual-input encoder, shared residual bottleneck, dual-output decoder. Each
/// output is the matching input plus a bounded residual, clamped to [0,1] and
/// zeroed outside the UV valid region.
class Generator {
 public:
  Generator() = default;
  Generator(const ColorNetConfig& cfg, const Plane& valid, Rng& rng);
  std::pair<Varf, Varf> operator()(const Varf& src, const Varf& ref) const;
  void collect(ParamsF& out) const;

 private:
  Encoder enc_src_;
  Encoder enc_ref_;
  nn::ConvBlock<float> fuse_;
  std::vector<nn::ResidualBlock<float>> blocks_;
  Decoder dec_src_;
  Decoder dec_ref_;
  nn::Tensor<float> valid_;
  int uv_size_ = 256;
};

/// Patch discriminator: strided leaky-ReLU convs to a one-channel score map.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const ColorNetConfig& cfg, Rng& rng);
  Varf operator()(const Varf& x) const;
  void collect(const std::string& prefix, ParamsF& out) const;

 private:
  std::vector<nn::Conv2d<float>> convs_;
};

/// The color-swapping network with its two discriminators and the frozen
/// perceptual feature extractor.
class ColorNet {
 public:
  static constexpr const char* kCheckpointKind = "color";

  ColorNet() = default;
  explicit ColorNet(const ColorNetConfig& cfg,
                    std::shared_ptr<const FeatureExtractor<float>> features = nullptr);

  bool initialized() const noexcept { return initialized_; }
  const ColorNetConfig& config() const { return config_; }

  /// (T_src, T_ref) -> (source wearing the reference colors, reference without them).
  std::pair<Varf, Varf> generate(const Varf& src, const Varf& ref) const;
  Varf score_makeup(const Varf& x) const { return d_makeup_(x); }
  Varf score_bare(const Varf& x) const { return d_bare_(x); }
  const FeatureExtractor<float>& features() const { return *features_; }

  ParamsF generator_parameters() const;
  ParamsF discriminator_parameters() const;

  /// Parameter tensors keyed "G/...", "D_makeup/...", "D_bare/...".
  std::map<std::string, nn::Tensor<float>> state() const;
  /// Copies matching tensors; throws checkpoint error on missing or mis-shaped entries.
  void load_state(const std::map<std::string, nn::Tensor<float>>& tensors);

  nn::Checkpoint to_checkpoint(std::uint64_t iteration, nlohmann::json metadata = nlohmann::json::object()) const;
  static ColorNet from_checkpoint(const nn::Checkpoint& ck,
                                  std::shared_ptr<const FeatureExtractor<float>> features = nullptr);

 private:
  void require_initialized() const;

  ColorNetConfig config_{};
  bool initialized_ = false;
  Generator generator_;
  Discriminator d_makeup_;
  Discriminator d_bare_;
  std::shared_ptr<const FeatureExtractor<float>> features_;
};

/// Inference: (T_s^{m_C}, T_r^{n_C}) := C(T_s^n, T_r^m).
std::pair<TextureMap, TextureMap> swap(const ColorNet& net, const TextureMap& t_src,
                                       const TextureMap& t_ref);

}  // namespace uvmakeup::color
