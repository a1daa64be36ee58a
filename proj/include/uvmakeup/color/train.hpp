#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/color/color_net.hpp"
#include "uvmakeup/color/losses.hpp"

namespace uvmakeup::color {

/// Unpaired training textures.
struct ColorDataset {
  std::vector<TextureMap> makeup;
  std::vector<TextureMap> bare;

  /// Reads `root/makeup/*.png` and `root/bare/*.png` in lexicographic order.
  static ColorDataset load(const std::filesystem::path& root);
};

/// Declarative training configuration. JSON keys: epochs, iters_per_epoch,
/// lr, beta1, beta2, batch_size, seed, lambda_* (see LossWeights), net
/// (see ColorNetConfig), checkpoint_dir, log_path, resume, dataset.
struct ColorTrainConfig {
  int epochs = 1;
  int iters_per_epoch = 200;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  std::uint64_t seed = 0;
  LossWeights weights{};
  ColorNetConfig net{};
  std::filesystem::path checkpoint_dir;
  std::filesystem::path log_path;
  std::filesystem::path resume;
  std::filesystem::path dataset;

  void validate() const;
  nlohmann::json to_json() const;
  static ColorTrainConfig from_json(const nlohmann::json& j);
};

struct GeneratorLoss {
  double total = 0.0;
  double adv = 0.0;
  double cyc = 0.0;
  double per = 0.0;
  double hist = 0.0;
};

struct ColorLogEntry {
  std::uint64_t iteration = 0;
  int epoch = 0;
  GeneratorLoss generator;
  double discriminator = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (bare index, makeup index)
};

nlohmann::json to_json(const ColorLogEntry& e);

struct ColorTrainResult {
  ColorNet net;
  std::vector<ColorLogEntry> log;
  std::vector<std::filesystem::path> checkpoints;
};

/// Training pair for (seed, iteration, slot): (bare index, makeup index).
std::pair<std::size_t, std::size_t> sample_pair(std::uint64_t seed, std::uint64_t iteration, int slot,
                                                std::size_t n_bare, std::size_t n_makeup);

/// Generator objective on one swapping pair, as logged during training.
GeneratorLoss evaluate_generator_loss(const ColorNet& net, const TextureMap& bare, const TextureMap& makeup,
                                      const LossWeights& w);

using ColorProgress = std::function<void(const ColorLogEntry&)>;

/// Alternating generator / discriminator updates. Each iteration first
/// evaluates and logs the generator loss at the current state, steps the
/// generator, then steps both discriminators on the detached fakes. The
/// discriminators are left untouched when lambda_adv is 0. Checkpoints are
/// written after every epoch when `checkpoint_dir` is set.
ColorTrainResult train_color(const ColorDataset& data, const ColorTrainConfig& config,
                             const ColorProgress& progress = {});

/// Reads a checkpoint written by train_color.
ColorNet load_color_net(const std::filesystem::path& path);

}  // namespace uvmakeup::color
