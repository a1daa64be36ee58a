#include "uvmakeup/pattern/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/nn/adam.hpp"
#include "uvmakeup/nn/convert.hpp"
#include "uvmakeup/pattern/dice.hpp"

namespace uvmakeup::pattern {
namespace fs = std::filesystem;

namespace {

struct Batch {
  nn::Tensor<float> x;
  nn::Tensor<float> y;
};

Batch make_batch(const PatternDataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
                 std::size_t end) {
  std::vector<const Raster<3>*> tex;
  std::vector<const Raster<1>*> masks;
  for (std::size_t i = begin; i < end; ++i) {
    tex.push_back(&data.textures[idx[i]]);
    masks.push_back(&data.masks[idx[i]]);
  }
  return {nn::to_batch<float>(tex), nn::to_batch<float>(masks)};
}

void check_dataset(const PatternDataset& data, int uv_size) {
  require(!data.textures.empty(), ErrorCategory::empty_dataset, "pattern training needs at least one sample");
  require(data.textures.size() == data.masks.size(), ErrorCategory::shape_mismatch,
          "pattern dataset has " + std::to_string(data.textures.size()) + " textures but " +
              std::to_string(data.masks.size()) + " masks");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& t = data.textures[i];
    const auto& m = data.masks[i];
    require(t.height() == uv_size && t.width() == uv_size && m.height() == uv_size && m.width() == uv_size,
            ErrorCategory::shape_mismatch, "pattern sample " + std::to_string(i) + " is not " +
                                               std::to_string(uv_size) + "x" + std::to_string(uv_size));
  }
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

void PatternTrainConfig::validate() const {
  require(epochs >= 1 && batch_size >= 1 && checkpoint_every >= 1, ErrorCategory::invalid_argument,
          "epochs, batch_size and checkpoint_every must be positive");
  require(std::isfinite(lr) && lr > 0.0, ErrorCategory::invalid_argument, "lr must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCategory::invalid_argument,
          "Adam betas must lie in [0,1)");
  net.validate();
}

nlohmann::json PatternTrainConfig::to_json() const {
  nlohmann::json j{{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},
                   {"beta1", beta1},   {"beta2", beta2},           {"seed", seed},
                   {"net", pattern::to_json(net)}, {"checkpoint_every", checkpoint_every}};
  if (!checkpoint_dir.empty()) j["checkpoint_dir"] = checkpoint_dir.string();
  if (!log_path.empty()) j["log_path"] = log_path.string();
  if (!resume.empty()) j["resume"] = resume.string();
  if (!encoder_weights.empty()) j["encoder_weights"] = encoder_weights.string();
  if (!dataset.empty()) j["dataset"] = dataset.string();
  return j;
}

PatternTrainConfig PatternTrainConfig::from_json(const nlohmann::json& j) {
  PatternTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.seed = j.value("seed", c.seed);
  c.net = seg_net_config_from_json(j.value("net", nlohmann::json::object()));
  c.checkpoint_dir = j.value("checkpoint_dir", std::string());
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_path = j.value("log_path", std::string());
  c.resume = j.value("resume", std::string());
  c.encoder_weights = j.value("encoder_weights", std::string());
  c.dataset = j.value("dataset", std::string());
  c.validate();
  return c;
}

nlohmann::json to_json(const PatternLogEntry& e) {
  return {{"epoch", e.epoch}, {"loss", e.loss}, {"batches", e.batches}};
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, 0x5e9), static_cast<std::uint64_t>(epoch));
  // Fisher-Yates with our own uniform draw so the order does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

double evaluate_dice_loss(const SegNet& net, const PatternDataset& data, int batch_size) {
  check_dataset(data, net.config().uv_size);
  nn::NoGradGuard guard;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    const std::size_t e = std::min(idx.size(), b + batch_size);
    const Batch batch = make_batch(data, idx, b, e);
    total += dice_loss(net.forward(Varf(batch.x)), batch.y).item() * static_cast<double>(e - b);
  }
  return total / static_cast<double>(data.size());
}

PatternTrainResult train_pattern(const PatternDataset& data, const PatternTrainConfig& config,
                                 const PatternProgress& progress) {
  config.validate();
  check_dataset(data, config.net.uv_size);

  PatternTrainResult result;
  int start = 0;
  nn::Checkpoint resumed;
  if (!config.resume.empty()) {
    resumed = nn::load_checkpoint(config.resume, SegNet::kCheckpointKind);
    result.net = SegNet::from_checkpoint(resumed);
    start = static_cast<int>(resumed.iteration);
  } else {
    result.net = SegNet(config.net);
    if (!config.encoder_weights.empty()) {
      const int n = result.net.load_encoder(nn::load_checkpoint(config.encoder_weights).tensors);
      spdlog::info("loaded {} encoder tensors from {}", n, config.encoder_weights.string());
    }
  }
  SegNet& net = result.net;
  nn::Adam<float> opt(net.parameters(), {config.lr, config.beta1, config.beta2, 1e-8});
  if (!config.resume.empty()) {
    opt.load_state(strip_prefix(resumed.tensors, "opt/"), resumed.metadata.value("steps", std::uint64_t{0}));
  }

  std::ofstream log_file;
  if (!config.log_path.empty()) {
    if (config.log_path.has_parent_path()) fs::create_directories(config.log_path.parent_path());
    log_file.open(config.log_path, std::ios::app);
    require(log_file.good(), ErrorCategory::io, "cannot open log " + config.log_path.string());
  }
  if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);

  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = start; epoch < config.epochs; ++epoch) {
    const auto idx = epoch_order(config.seed, epoch, data.size());
    PatternLogEntry entry;
    entry.epoch = epoch;
    for (std::size_t b = 0; b < idx.size(); b += bs) {
      const Batch batch = make_batch(data, idx, b, std::min(idx.size(), b + bs));
      opt.zero_grad();
      const Varf loss = dice_loss(net.forward(Varf(batch.x)), batch.y);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        fail(ErrorCategory::numeric, "non-finite dice loss at epoch " + std::to_string(epoch),
             "batch " + std::to_string(entry.batches));
      }
      loss.backward();
      opt.step();
      entry.loss += value;
      ++entry.batches;
    }
    entry.loss /= entry.batches;
    if (log_file.is_open()) log_file << to_json(entry).dump() << '\n';
    if (progress) progress(entry);
    result.log.push_back(entry);

    if (!config.checkpoint_dir.empty()) {
      nlohmann::json meta;
      meta["train"] = config.to_json();
      meta["steps"] = opt.steps();
      nn::Checkpoint ck = net.to_checkpoint(static_cast<std::uint64_t>(epoch + 1), meta);
      add_prefixed(ck.tensors, "opt/", opt.state());
      nn::save_checkpoint(config.checkpoint_dir / "pattern_latest.uvmc", ck);
      if ((epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs) {
        char name[32];
        std::snprintf(name, sizeof name, "pattern_epoch%04d.uvmc", epoch + 1);
        nn::save_checkpoint(config.checkpoint_dir / name, ck);
        result.checkpoints.push_back(config.checkpoint_dir / name);
      }
    }
    spdlog::info("pattern epoch {} loss {:.4f}", epoch + 1, entry.loss);
  }
  return result;
}

}  // namespace uvmakeup::pattern
