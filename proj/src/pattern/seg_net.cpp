#include "uvmakeup/pattern/seg_net.hpp"

#include <cmath>
#include <limits>

#include "uvmakeup/nn/convert.hpp"
#include "uvmakeup/pattern/dice.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::pattern {

using nn::ConvBlock;

void SegNetConfig::validate() const {
  require(!widths.empty() && widths.size() <= 6, ErrorCategory::invalid_argument, "SegNet needs 1 to 6 stages");
  for (int w : widths) require(w >= 1, ErrorCategory::invalid_argument, "SegNet widths must be positive");
  const int div = 1 << (widths.size() + 1);
  require(uv_size >= 8 && uv_size % div == 0, ErrorCategory::invalid_argument,
          "uv_size must be divisible by 2^stages");
}

nlohmann::json to_json(const SegNetConfig& c) {
  return {{"uv_size", c.uv_size}, {"widths", c.widths}, {"seed", c.seed}};
}

SegNetConfig seg_net_config_from_json(const nlohmann::json& j, SegNetConfig c) {
  c.uv_size = j.value("uv_size", c.uv_size);
  c.widths = j.value("widths", c.widths);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

SegNet::SegNet(const SegNetConfig& cfg) : config_(cfg), initialized_(true) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 11);
  const auto& w = cfg.widths;
  int in = 3;
  for (std::size_t i = 0; i < w.size(); ++i) {
    enc_.emplace_back(in, w[i], 3, 2, rng);
    in = w[i];
  }
  bottleneck_ = ConvBlock<float>(w.back(), w.back(), 3, 2, rng);
  int below = w.back();
  for (std::size_t k = w.size(); k-- > 0;) {
    dec_.emplace_back(below + w[k], w[k], 3, 1, rng);
    below = w[k];
  }
  head_ = nn::Conv2d<float>(w.front(), 1, 1, 1, rng);
}

void SegNet::require_initialized() const {
  require(initialized_, ErrorCategory::model_missing, "segmentation network is not initialized");
}

Varf SegNet::forward(const Varf& x) const {
  require_initialized();
  const int s = config_.uv_size;
  require(x.shape().c == 3 && x.shape().h == s && x.shape().w == s, ErrorCategory::shape_mismatch,
          "segmentation network expects " + std::to_string(s) + "x" + std::to_string(s) + " textures, got " +
              x.shape().str());
  std::vector<Varf> skips;
  Varf y = x;
  for (const auto& e : enc_) {
    y = e(y);
    skips.push_back(y);
  }
  y = bottleneck_(y);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    y = dec_[i](nn::concat_channels(nn::upsample_nearest2x(y), skips[skips.size() - 1 - i]));
  }
  return nn::sigmoid(nn::resize_bilinear(head_(y), s, s));
}

nn::ParameterList<float> SegNet::parameters() const {
  nn::ParameterList<float> out;
  for (std::size_t i = 0; i < enc_.size(); ++i) enc_[i].collect("enc.s" + std::to_string(i), out);
  bottleneck_.collect("enc.bottleneck", out);
  for (std::size_t i = 0; i < dec_.size(); ++i) dec_[i].collect("dec.s" + std::to_string(i), out);
  head_.collect("dec.head", out);
  return out;
}

std::map<std::string, nn::Tensor<float>> SegNet::state() const {
  require_initialized();
  std::map<std::string, nn::Tensor<float>> out;
  for (const auto& p : parameters()) out.emplace(p.name, p.var.value());
  return out;
}

void SegNet::load_state(const std::map<std::string, nn::Tensor<float>>& tensors) {
  require_initialized();
  for (auto& p : parameters()) {
    const auto it = tensors.find(p.name);
    require(it != tensors.end(), ErrorCategory::checkpoint, "checkpoint lacks tensor " + p.name);
    require(it->second.shape() == p.var.shape(), ErrorCategory::checkpoint,
            "tensor " + p.name + " has shape " + it->second.shape().str() + ", expected " + p.var.shape().str());
    p.var.mutable_value() = it->second;
  }
}

int SegNet::load_encoder(const std::map<std::string, nn::Tensor<float>>& tensors) {
  require_initialized();
  int loaded = 0;
  for (auto& p : parameters()) {
    if (p.name.rfind("enc.", 0) != 0) continue;
    const auto it = tensors.find(p.name);
    if (it == tensors.end()) continue;
    require(it->second.shape() == p.var.shape(), ErrorCategory::checkpoint,
            "encoder tensor " + p.name + " has shape " + it->second.shape().str());
    p.var.mutable_value() = it->second;
    ++loaded;
  }
  return loaded;
}

nn::Checkpoint SegNet::to_checkpoint(std::uint64_t iteration, nlohmann::json metadata) const {
  nn::Checkpoint ck;
  ck.kind = kCheckpointKind;
  ck.iteration = iteration;
  ck.metadata = std::move(metadata);
  ck.metadata["net"] = to_json(config_);
  ck.tensors = state();
  return ck;
}

SegNet SegNet::from_checkpoint(const nn::Checkpoint& ck) {
  require(ck.kind == kCheckpointKind, ErrorCategory::checkpoint,
          "expected a '" + std::string(kCheckpointKind) + "' checkpoint, got '" + ck.kind + "'");
  SegNet net(seg_net_config_from_json(ck.metadata.value("net", nlohmann::json::object())));
  net.load_state(ck.tensors);
  return net;
}

PatternMask predict_mask_raw(const SegNet& net, const TextureMap& tex) {
  require(net.initialized(), ErrorCategory::model_missing, "segmentation network is not initialized");
  nn::NoGradGuard guard;
  PatternMask out = nn::to_raster<1>(net.forward(Varf(nn::to_tensor<float>(tex))).value());
  // Float sigmoid saturates to exactly 0 or 1 for large logits.
  const float lo = std::numeric_limits<float>::min();
  const float hi = std::nextafter(1.0f, 0.0f);
  for (float& v : out.values()) v = v < lo ? lo : (v > hi ? hi : v);
  return out;
}

PatternMask contain(PatternMask mask) {
  require(mask.height() == mask.width(), ErrorCategory::shape_mismatch, "pattern masks are square");
  const uvgeom::UvLayout layout(mask.height());
  const auto valid = layout.valid_plane().values();
  auto m = mask.values();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (valid[i] <= 0.5f) m[i] = 0.0f;
  }
  return mask;
}

PatternMask predict_mask(const SegNet& net, const TextureMap& tex) { return contain(predict_mask_raw(net, tex)); }

SegNet load_seg_net(const std::filesystem::path& path) {
  return SegNet::from_checkpoint(nn::load_checkpoint(path, SegNet::kCheckpointKind));
}

}  // namespace uvmakeup::pattern
