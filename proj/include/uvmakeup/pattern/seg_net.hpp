#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/nn/checkpoint.hpp"
#include "uvmakeup/nn/layers.hpp"

namespace uvmakeup::pattern {

/// Reduced-width UNet. Encoder stage i runs at uv_size / 2^(i+1) with
/// widths[i] channels; the logits are bilinearly upsampled to uv_size.
struct SegNetConfig {
  int uv_size = 256;
  std::vector<int> widths{8, 16, 32, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SegNetConfig& c);
SegNetConfig seg_net_config_from_json(const nlohmann::json& j, SegNetConfig base = {});

using Varf = nn::Var<float>;

class SegNet {
 public:
  static constexpr const char* kCheckpointKind = "pattern";

  SegNet() = default;
  explicit SegNet(const SegNetConfig& cfg);

  bool initialized() const noexcept { return initialized_; }
  const SegNetConfig& config() const { return config_; }

  /// [N,3,S,S] textures -> [N,1,S,S] sigmoid probabilities.
  Varf forward(const Varf& x) const;

  nn::ParameterList<float> parameters() const;
  /// Encoder tensors are named "enc.*", decoder tensors "dec.*".
  std::map<std::string, nn::Tensor<float>> state() const;
  void load_state(const std::map<std::string, nn::Tensor<float>>& tensors);
  /// Copies every "enc.*" tensor present in `tensors` (pretrained encoder
  /// weights); returns the number loaded. Shape mismatches are errors.
  int load_encoder(const std::map<std::string, nn::Tensor<float>>& tensors);

  nn::Checkpoint to_checkpoint(std::uint64_t iteration, nlohmann::json metadata = nlohmann::json::object()) const;
  static SegNet from_checkpoint(const nn::Checkpoint& ck);

 private:
  void require_initialized() const;

  SegNetConfig config_{};
  bool initialized_ = false;
  std::vector<nn::ConvBlock<float>> enc_;
  nn::ConvBlock<float> bottleneck_;
  std::vector<nn::ConvBlock<float>> dec_;
  nn::Conv2d<float> head_;
};

/// Sigmoid output for one texture; every value lies in (0,1).
PatternMask predict_mask_raw(const SegNet& net, const TextureMap& tex);

/// predict_mask_raw with everything outside the UV valid region set to zero.
PatternMask predict_mask(const SegNet& net, const TextureMap& tex);

/// Zeroes `mask` outside the valid region of a layout of the mask's size.
PatternMask contain(PatternMask mask);

SegNet load_seg_net(const std::filesystem::path& path);

}  // namespace uvmakeup::pattern
