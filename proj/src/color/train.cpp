#include "uvmakeup/color/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/nn/adam.hpp"

namespace uvmakeup::color {
namespace fs = std::filesystem;

namespace {

std::vector<TextureMap> load_textures(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCategory::empty_dataset, "missing texture directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TextureMap> out;
  out.reserve(files.size());
  for (const auto& f : files) out.emplace_back(io::read_png(f));
  return out;
}

struct LossGraph {
  Varf total;
  GeneratorLoss values;
  Varf fake_makeup;
  Varf fake_bare;
};

LossGraph generator_graph(const ColorNet& net, const TextureMap& bare, const TextureMap& makeup,
                          const LossWeights& w, const uvgeom::RegionMaskSet& regions) {
  const nn::Tensor<float> s = nn::to_tensor<float>(bare);
  const nn::Tensor<float> r = nn::to_tensor<float>(makeup);
  const auto [fs_, fr] = net.generate(Varf(s), Varf(r));
  const auto [rs, rr] = net.generate(fs_, fr);

  const Varf adv = nn::add(lsgan_generator_loss(net.score_makeup(fs_)), lsgan_generator_loss(net.score_bare(fr)));
  const Varf cyc = nn::add(cyc_loss(rs, s), cyc_loss(rr, r));
  const Varf per = nn::add(per_loss(net.features(), s, fs_), per_loss(net.features(), r, fr));
  const Varf hist = nn::add(hist_loss(fs_, hist_targets<float>(bare, makeup, regions, w)),
                            hist_loss(fr, hist_targets<float>(makeup, bare, regions, w)));
  Varf total = nn::scale(adv, float(w.lambda_adv));
  total = nn::add(total, nn::scale(cyc, float(w.lambda_cyc)));
  total = nn::add(total, nn::scale(per, float(w.lambda_per)));
  total = nn::add(total, nn::scale(hist, float(w.lambda_hist)));
  LossGraph g{total, {}, fs_, fr};
  g.values = {total.item(), adv.item(), cyc.item(), per.item(), hist.item()};
  return g;
}

bool finite(const GeneratorLoss& l) {
  return std::isfinite(l.total) && std::isfinite(l.adv) && std::isfinite(l.cyc) && std::isfinite(l.per) &&
         std::isfinite(l.hist);
}

nlohmann::json loss_json(const GeneratorLoss& l) {
  return {{"total", l.total}, {"adv", l.adv}, {"cyc", l.cyc}, {"per", l.per}, {"hist", l.hist}};
}

void add_prefixed(std::map<std::string, nn::Tensor<float>>& dst, const std::string& prefix,
                  const std::map<std::string, nn::Tensor<float>>& src) {
  for (const auto& [k, v] : src) dst.emplace(prefix + k, v);
}

std::map<std::string, nn::Tensor<float>> strip_prefix(const std::map<std::string, nn::Tensor<float>>& src,
                                                      const std::string& prefix) {
  std::map<std::string, nn::Tensor<float>> out;
  for (const auto& [k, v] : src) {
    if (k.rfind(prefix, 0) == 0) out.emplace(k.substr(prefix.size()), v);
  }
  return out;
}

}  // namespace

ColorDataset ColorDataset::load(const fs::path& root) {
  ColorDataset d;
  d.makeup = load_textures(root / "makeup");
  d.bare = load_textures(root / "bare");
  return d;
}

void ColorTrainConfig::validate() const {
  require(epochs >= 1 && iters_per_epoch >= 1 && batch_size >= 1, ErrorCategory::invalid_argument,
          "epochs, iters_per_epoch and batch_size must be positive");
  require(std::isfinite(lr) && lr > 0.0, ErrorCategory::invalid_argument, "lr must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCategory::invalid_argument,
          "Adam betas must lie in [0,1)");
  weights.validate();
  net.validate();
}

nlohmann::json ColorTrainConfig::to_json() const {
  nlohmann::json j = color::to_json(weights);
  j["epochs"] = epochs;
  j["iters_per_epoch"] = iters_per_epoch;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["net"] = color::to_json(net);
  if (!checkpoint_dir.empty()) j["checkpoint_dir"] = checkpoint_dir.string();
  if (!log_path.empty()) j["log_path"] = log_path.string();
  if (!resume.empty()) j["resume"] = resume.string();
  if (!dataset.empty()) j["dataset"] = dataset.string();
  return j;
}

ColorTrainConfig ColorTrainConfig::from_json(const nlohmann::json& j) {
  ColorTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.iters_per_epoch = j.value("iters_per_epoch", c.iters_per_epoch);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.weights = loss_weights_from_json(j);
  c.net = color_net_config_from_json(j.value("net", nlohmann::json::object()));
  c.checkpoint_dir = j.value("checkpoint_dir", std::string());
  c.log_path = j.value("log_path", std::string());
  c.resume = j.value("resume", std::string());
  c.dataset = j.value("dataset", std::string());
  c.validate();
  return c;
}

nlohmann::json to_json(const ColorLogEntry& e) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [b, m] : e.pairs) pairs.push_back({b, m});
  return {{"iteration", e.iteration},
          {"epoch", e.epoch},
          {"generator", loss_json(e.generator)},
          {"discriminator", e.discriminator},
          {"pairs", pairs}};
}

std::pair<std::size_t, std::size_t> sample_pair(std::uint64_t seed, std::uint64_t iteration, int slot,
                                                std::size_t n_bare, std::size_t n_makeup) {
  Rng rng = make_rng(derive_seed(seed, iteration), static_cast<std::uint64_t>(slot));
  const std::size_t b = uniform_int(rng, 0, static_cast<std::int64_t>(n_bare) - 1);
  const std::size_t m = uniform_int(rng, 0, static_cast<std::int64_t>(n_makeup) - 1);
  return {b, m};
}

GeneratorLoss evaluate_generator_loss(const ColorNet& net, const TextureMap& bare, const TextureMap& makeup,
                                      const LossWeights& w) {
  nn::NoGradGuard guard;
  const auto regions = uvgeom::universal_region_masks(net.config().uv_size);
  return generator_graph(net, bare, makeup, w, regions).values;
}

ColorTrainResult train_color(const ColorDataset& data, const ColorTrainConfig& config,
                             const ColorProgress& progress) {
  config.validate();
  require(!data.bare.empty() && !data.makeup.empty(), ErrorCategory::empty_dataset,
          "color training needs non-empty makeup and non-makeup sets");
  for (const auto* set : {&data.bare, &data.makeup}) {
    for (const auto& t : *set) {
      require(t.height() == config.net.uv_size && t.width() == config.net.uv_size, ErrorCategory::shape_mismatch,
              "training texture is " + std::to_string(t.height()) + "x" + std::to_string(t.width()));
    }
  }

  ColorTrainResult result;
  std::uint64_t start = 0;
  nn::Checkpoint resumed;
  if (!config.resume.empty()) {
    resumed = nn::load_checkpoint(config.resume, ColorNet::kCheckpointKind);
    result.net = ColorNet::from_checkpoint(resumed);
    start = resumed.iteration;
  } else {
    result.net = ColorNet(config.net);
  }
  ColorNet& net = result.net;

  nn::Adam<float> opt_g(net.generator_parameters(), {config.lr, config.beta1, config.beta2, 1e-8});
  nn::Adam<float> opt_d(net.discriminator_parameters(), {config.lr, config.beta1, config.beta2, 1e-8});
  if (!config.resume.empty()) {
    const auto steps_g = resumed.metadata.value("steps_g", std::uint64_t{0});
    const auto steps_d = resumed.metadata.value("steps_d", std::uint64_t{0});
    opt_g.load_state(strip_prefix(resumed.tensors, "opt_G/"), steps_g);
    opt_d.load_state(strip_prefix(resumed.tensors, "opt_D/"), steps_d);
  }

  const auto regions = uvgeom::universal_region_masks(config.net.uv_size);
  const bool train_d = config.weights.lambda_adv > 0.0;
  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);
  std::ofstream log_file;
  if (!config.log_path.empty()) {
    if (config.log_path.has_parent_path()) fs::create_directories(config.log_path.parent_path());
    log_file.open(config.log_path, std::ios::app);
    require(log_file.good(), ErrorCategory::io, "cannot open log " + config.log_path.string());
  }

  const std::uint64_t total_iters = static_cast<std::uint64_t>(config.epochs) * config.iters_per_epoch;
  for (std::uint64_t it = start; it < total_iters; ++it) {
    ColorLogEntry entry;
    entry.iteration = it;
    entry.epoch = static_cast<int>(it / config.iters_per_epoch);

    opt_g.zero_grad();
    std::vector<std::pair<Varf, Varf>> fakes;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto pair = sample_pair(config.seed, it, b, data.bare.size(), data.makeup.size());
      entry.pairs.push_back(pair);
      LossGraph g = generator_graph(net, data.bare[pair.first], data.makeup[pair.second], config.weights, regions);
      if (!finite(g.values)) {
        fail(ErrorCategory::numeric, "non-finite generator loss at iteration " + std::to_string(it),
             loss_json(g.values).dump());
      }
      entry.generator.total += g.values.total * inv_batch;
      entry.generator.adv += g.values.adv * inv_batch;
      entry.generator.cyc += g.values.cyc * inv_batch;
      entry.generator.per += g.values.per * inv_batch;
      entry.generator.hist += g.values.hist * inv_batch;
      nn::scale(g.total, inv_batch).backward();
      fakes.emplace_back(Varf(g.fake_makeup.value()), Varf(g.fake_bare.value()));
    }
    opt_g.step();

    if (train_d) {
      opt_d.zero_grad();
      double d_total = 0.0;
      for (int b = 0; b < config.batch_size; ++b) {
        const auto [bi, mi] = entry.pairs[b];
        const Varf real_m(nn::to_tensor<float>(data.makeup[mi]));
        const Varf real_n(nn::to_tensor<float>(data.bare[bi]));
        const Varf dm = nn::add(lsgan_real_loss(net.score_makeup(real_m)), lsgan_fake_loss(net.score_makeup(fakes[b].first)));
        const Varf dn = nn::add(lsgan_real_loss(net.score_bare(real_n)), lsgan_fake_loss(net.score_bare(fakes[b].second)));
        const Varf d = nn::scale(nn::add(dm, dn), 0.5f * inv_batch);
        require(std::isfinite(d.item()), ErrorCategory::numeric,
                "non-finite discriminator loss at iteration " + std::to_string(it));
        d_total += d.item();
        d.backward();
      }
      opt_d.step();
      entry.discriminator = d_total;
    }

    if (log_file.is_open()) log_file << to_json(entry).dump() << '\n';
    if (progress) progress(entry);
    result.log.push_back(std::move(entry));

    const bool epoch_end = (it + 1) % config.iters_per_epoch == 0;
    if (epoch_end && !config.checkpoint_dir.empty()) {
      nlohmann::json meta;
      meta["train"] = config.to_json();
      meta["loss_weights"] = to_json(config.weights);
      meta["steps_g"] = opt_g.steps();
      meta["steps_d"] = opt_d.steps();
      nn::Checkpoint ck = net.to_checkpoint(it + 1, meta);
      add_prefixed(ck.tensors, "opt_G/", opt_g.state());
      add_prefixed(ck.tensors, "opt_D/", opt_d.state());
      char name[32];
      std::snprintf(name, sizeof name, "color_epoch%04d.uvmc", static_cast<int>((it + 1) / config.iters_per_epoch));
      const fs::path path = config.checkpoint_dir / name;
      nn::save_checkpoint(path, ck);
      nn::save_checkpoint(config.checkpoint_dir / "color_latest.uvmc", ck);
      result.checkpoints.push_back(path);
      spdlog::info("color epoch {} done: G {:.4f} D {:.4f} -> {}", (it + 1) / config.iters_per_epoch,
                   result.log.back().generator.total, result.log.back().discriminator, path.string());
    }
  }
  return result;
}

ColorNet load_color_net(const fs::path& path) {
  return ColorNet::from_checkpoint(nn::load_checkpoint(path, ColorNet::kCheckpointKind));
}

}  // namespace uvmakeup::color
