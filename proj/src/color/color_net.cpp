#include "uvmakeup/color/color_net.hpp"

#include <algorithm>

#include "uvmakeup/nn/convert.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::color {
namespace {

using nn::ConvBlock;

std::vector<int> stage_widths(const ColorNetConfig& c) {
  std::vector<int> w;
  for (int i = 0; i < c.down_stages; ++i) w.push_back(c.base_width * std::min(1 << i, 4));
  return w;
}

void collect_into(const ParamsF& params, const std::string& prefix,
                  std::map<std::string, nn::Tensor<float>>& out) {
  for (const auto& p : params) out.emplace(prefix + p.name, p.var.value());
}

}  // namespace

void ColorNetConfig::validate() const {
  require(uv_size >= 16 && uv_size % (1 << down_stages) == 0, ErrorCategory::invalid_argument,
          "uv_size must be divisible by 2^down_stages");
  require(base_width >= 1 && down_stages >= 1 && res_blocks >= 0 && disc_width >= 1 && disc_layers >= 1,
          ErrorCategory::invalid_argument, "color net widths and depths must be positive");
}

nlohmann::json to_json(const ColorNetConfig& c) {
  return {{"uv_size", c.uv_size},       {"base_width", c.base_width}, {"down_stages", c.down_stages},
          {"res_blocks", c.res_blocks}, {"disc_width", c.disc_width}, {"disc_layers", c.disc_layers},
          {"seed", c.seed}};
}

ColorNetConfig color_net_config_from_json(const nlohmann::json& j, ColorNetConfig c) {
  c.uv_size = j.value("uv_size", c.uv_size);
  c.base_width = j.value("base_width", c.base_width);
  c.down_stages = j.value("down_stages", c.down_stages);
  c.res_blocks = j.value("res_blocks", c.res_blocks);
  c.disc_width = j.value("disc_width", c.disc_width);
  c.disc_layers = j.value("disc_layers", c.disc_layers);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

Encoder::Encoder(const std::vector<int>& widths, Rng& rng) {
  int in = 3;
  for (int w : widths) {
    stages_.emplace_back(in, w, 3, 2, rng);
    in = w;
  }
}

std::vector<Varf> Encoder::operator()(const Varf& x) const {
  std::vector<Varf> feats;
  Varf y = x;
  for (const auto& s : stages_) {
    y = s(y);
    feats.push_back(y);
  }
  return feats;
}

void Encoder::collect(const std::string& prefix, ParamsF& out) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect(prefix + ".s" + std::to_string(i), out);
}

Decoder::Decoder(const std::vector<int>& widths, Rng& rng) {
  for (std::size_t k = widths.size() - 1; k >= 1; --k) {
    stages_.emplace_back(widths[k] + widths[k - 1], widths[k - 1], 3, 1, rng);
  }
  head_ = nn::Conv2d<float>(widths.front(), 3, 3, 1, rng, 0.1);
}

Varf Decoder::operator()(const Varf& bottleneck, const std::vector<Varf>& skips) const {
  Varf y = bottleneck;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const Varf& skip = skips[skips.size() - 2 - i];
    y = stages_[i](nn::concat_channels(nn::upsample_nearest2x(y), skip));
  }
  return nn::tanh(head_(y));
}

void Decoder::collect(const std::string& prefix, ParamsF& out) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect(prefix + ".s" + std::to_string(i), out);
  head_.collect(prefix + ".head", out);
}

Generator::Generator(const ColorNetConfig& cfg, const Plane& valid, Rng& rng)
    : valid_(nn::to_tensor<float>(valid)), uv_size_(cfg.uv_size) {
  const auto widths = stage_widths(cfg);
  const int wl = widths.back();
  enc_src_ = Encoder(widths, rng);
  enc_ref_ = Encoder(widths, rng);
  fuse_ = ConvBlock<float>(2 * wl, wl, 3, 1, rng);
  for (int i = 0; i < cfg.res_blocks; ++i) blocks_.emplace_back(wl, rng);
  dec_src_ = Decoder(widths, rng);
  dec_ref_ = Decoder(widths, rng);
}

std::pair<Varf, Varf> Generator::operator()(const Varf& src, const Varf& ref) const {
  const auto fs = enc_src_(src);
  const auto fr = enc_ref_(ref);
  Varf h = fuse_(nn::concat_channels(fs.back(), fr.back()));
  for (const auto& b : blocks_) h = b(h);
  auto finish = [&](const Varf& input, const Varf& residual) {
    const Varf delta = nn::resize_bilinear(residual, uv_size_, uv_size_);
    return nn::mul_plane(nn::clamp(nn::add(input, delta), 0.0f, 1.0f), valid_);
  };
  return {finish(src, dec_src_(h, fs)), finish(ref, dec_ref_(h, fr))};
}

void Generator::collect(ParamsF& out) const {
  enc_src_.collect("enc_src", out);
  enc_ref_.collect("enc_ref", out);
  fuse_.collect("fuse", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("res" + std::to_string(i), out);
  dec_src_.collect("dec_src", out);
  dec_ref_.collect("dec_ref", out);
}

Discriminator::Discriminator(const ColorNetConfig& cfg, Rng& rng) {
  int in = 3;
  int w = cfg.disc_width;
  for (int i = 0; i < cfg.disc_layers; ++i) {
    convs_.emplace_back(in, w, 3, 2, rng);
    in = w;
    w *= 2;
  }
  convs_.emplace_back(in, 1, 3, 1, rng);
}

Varf Discriminator::operator()(const Varf& x) const {
  Varf y = x;
  for (std::size_t i = 0; i + 1 < convs_.size(); ++i) y = nn::leaky_relu(convs_[i](y));
  return convs_.back()(y);
}

void Discriminator::collect(const std::string& prefix, ParamsF& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(prefix + ".c" + std::to_string(i), out);
}

ColorNet::ColorNet(const ColorNetConfig& cfg, std::shared_ptr<const FeatureExtractor<float>> features)
    : config_(cfg), initialized_(true), features_(std::move(features)) {
  cfg.validate();
  const uvgeom::UvLayout layout(cfg.uv_size);
  Rng g = make_rng(cfg.seed, 1);
  Rng dm = make_rng(cfg.seed, 2);
  Rng dn = make_rng(cfg.seed, 3);
  generator_ = Generator(cfg, layout.valid_plane(), g);
  d_makeup_ = Discriminator(cfg, dm);
  d_bare_ = Discriminator(cfg, dn);
  if (!features_) features_ = std::make_shared<ConvFeatureStack<float>>(cfg.seed);
}

void ColorNet::require_initialized() const {
  require(initialized_, ErrorCategory::model_missing, "color network is not initialized");
}

std::pair<Varf, Varf> ColorNet::generate(const Varf& src, const Varf& ref) const {
  require_initialized();
  const nn::Shape expect{1, 3, config_.uv_size, config_.uv_size};
  require(src.shape().c == 3 && src.shape().h == expect.h && src.shape().w == expect.w &&
              ref.shape() == src.shape(),
          ErrorCategory::shape_mismatch,
          "color network expects " + std::to_string(expect.h) + "x" + std::to_string(expect.w) + " textures");
  return generator_(src, ref);
}

ParamsF ColorNet::generator_parameters() const {
  ParamsF out;
  generator_.collect(out);
  return out;
}

ParamsF ColorNet::discriminator_parameters() const {
  ParamsF out;
  d_makeup_.collect("D_makeup", out);
  d_bare_.collect("D_bare", out);
  return out;
}

std::map<std::string, nn::Tensor<float>> ColorNet::state() const {
  require_initialized();
  std::map<std::string, nn::Tensor<float>> out;
  collect_into(generator_parameters(), "G/", out);
  collect_into(discriminator_parameters(), "", out);
  return out;
}

void ColorNet::load_state(const std::map<std::string, nn::Tensor<float>>& tensors) {
  require_initialized();
  auto load = [&](ParamsF params, const std::string& prefix) {
    for (auto& p : params) {
      const auto it = tensors.find(prefix + p.name);
      require(it != tensors.end(), ErrorCategory::checkpoint, "checkpoint lacks tensor " + prefix + p.name);
      require(it->second.shape() == p.var.shape(), ErrorCategory::checkpoint,
              "tensor " + prefix + p.name + " has shape " + it->second.shape().str() + ", expected " +
                  p.var.shape().str());
      p.var.mutable_value() = it->second;
    }
  };
  load(generator_parameters(), "G/");
  load(discriminator_parameters(), "");
}

nn::Checkpoint ColorNet::to_checkpoint(std::uint64_t iteration, nlohmann::json metadata) const {
  nn::Checkpoint ck;
  ck.kind = kCheckpointKind;
  ck.iteration = iteration;
  ck.metadata = std::move(metadata);
  ck.metadata["net"] = to_json(config_);
  ck.tensors = state();
  return ck;
}

ColorNet ColorNet::from_checkpoint(const nn::Checkpoint& ck,
                                   std::shared_ptr<const FeatureExtractor<float>> features) {
  require(ck.kind == kCheckpointKind, ErrorCategory::checkpoint,
          "expected a '" + std::string(kCheckpointKind) + "' checkpoint, got '" + ck.kind + "'");
  ColorNet net(color_net_config_from_json(ck.metadata.value("net", nlohmann::json::object())),
               std::move(features));
  net.load_state(ck.tensors);
  return net;
}

std::pair<TextureMap, TextureMap> swap(const ColorNet& net, const TextureMap& t_src, const TextureMap& t_ref) {
  require(net.initialized(), ErrorCategory::model_missing, "color network is not initialized");
  require_same_size(t_src, t_ref, "swap");
  nn::NoGradGuard guard;
  const auto [a, b] = net.generate(Varf(nn::to_tensor<float>(t_src)), Varf(nn::to_tensor<float>(t_ref)));
  return {TextureMap(nn::to_raster<3>(a.value())), TextureMap(nn::to_raster<3>(b.value()))};
}

}  // namespace uvmakeup::color
