#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/pattern/seg_net.hpp"

namespace uvmakeup::pattern {

struct PatternDataset {
  std::vector<TextureMap> textures;
  std::vector<PatternMask> masks;

  std::size_t size() const { return textures.size(); }
};

/// JSON keys: epochs, batch_size, lr, beta1, beta2, seed, net (see
/// SegNetConfig), checkpoint_dir, checkpoint_every, log_path, resume,
/// encoder_weights, dataset.
struct PatternTrainConfig {
  int epochs = 300;
  int batch_size = 8;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  SegNetConfig net{};
  std::filesystem::path checkpoint_dir;
  int checkpoint_every = 10;
  std::filesystem::path log_path;
  std::filesystem::path resume;
  std::filesystem::path encoder_weights;
  std::filesystem::path dataset;

  void validate() const;
  nlohmann::json to_json() const;
  static PatternTrainConfig from_json(const nlohmann::json& j);
};

struct PatternLogEntry {
  int epoch = 0;
  double loss = 0.0;  // mean over the epoch's batches
  int batches = 0;
};

nlohmann::json to_json(const PatternLogEntry& e);

struct PatternTrainResult {
  SegNet net;
  std::vector<PatternLogEntry> log;
  std::vector<std::filesystem::path> checkpoints;
};

/// Visiting order of the samples in `epoch`.
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

/// Mean 1 - dice of the net's predictions over the dataset, no gradients.
double evaluate_dice_loss(const SegNet& net, const PatternDataset& data, int batch_size = 8);

using PatternProgress = std::function<void(const PatternLogEntry&)>;

/// Minimizes 1 - soft dice with Adam over shuffled mini-batches. Writes
/// pattern_latest.uvmc after every epoch and pattern_epochNNNN.uvmc every
/// `checkpoint_every` epochs and at the end, when `checkpoint_dir` is set.
PatternTrainResult train_pattern(const PatternDataset& data, const PatternTrainConfig& config,
                                 const PatternProgress& progress = {});

}  // namespace uvmakeup::pattern
