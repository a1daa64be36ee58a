#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::metrics {

inline constexpr float kMiouThreshold = 0.5f;

struct IouStats {
  double miou = 0.0;
  double foreground = 0.0;
  double background = 0.0;
  /// A class absent from both masks scores 1; these flag that case.
  bool vacuous_foreground = false;
  bool vacuous_background = false;
};

/// Two-class (pattern/background) IoU after binarizing both masks with `> threshold`.
IouStats iou_stats(const PatternMask& gt, const PatternMask& pr, float threshold = kMiouThreshold);
double miou(const PatternMask& gt, const PatternMask& pr, float threshold = kMiouThreshold);

struct MsSsimOptions {
  int scales = 5;
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Per-scale terms are clamped below at this value before the weighted
  /// product, keeping the result in (0,1] for anti-correlated inputs.
  double floor = 1e-6;
};

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct MsSsimResult {
  double value = 0.0;
  int scales_used = 0;
};

/// Multi-scale SSIM over RGB images in [0,1]: Gaussian 11x11 windows, mean
/// contrast-structure at the finer scales and mean SSIM at the coarsest,
/// 2x2 average pooling between scales, per-channel results averaged. Images
/// too small for every scale use fewer scales with renormalized weights.
MsSsimResult ms_ssim_detail(const RgbRaster& a, const RgbRaster& b, const MsSsimOptions& opt = {});
double ms_ssim(const RgbRaster& a, const RgbRaster& b);

/// Face identity embedding. Implementations throw geometry_failure when no
/// face can be found.
class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> embed(const Image& image) const = 0;
};

/// Deterministic stand-in: grayscale, box-downsampled to `grid` x `grid`,
/// mean-removed, then a fixed Gaussian random projection.
class ProjectionEmbedder final : public FaceEmbedder {
 public:
  explicit ProjectionEmbedder(int grid = 16, int dims = 64, std::uint64_t seed = 1234);
  std::string name() const override { return "projection"; }
  std::vector<double> embed(const Image& image) const override;

 private:
  int grid_;
  int dims_;
  std::vector<double> projection_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);
double identity_similarity(const Image& a, const Image& b, const FaceEmbedder& embedder);

/// Total-variation distance (half L1, in [0,1]) between normalized 256-bin
/// histograms of the masked region, averaged over channels.
double regional_histogram_distance(const TextureMap& a, const TextureMap& b, const SoftMask& mask);

struct EvalSample {
  std::string id;
  std::map<std::string, double> values;
  /// Metric name to failure message; failed metrics are excluded from means.
  std::map<std::string, std::string> errors;
  std::vector<std::string> flags;
};

struct MetricSummary {
  double mean = 0.0;
  std::size_t count = 0;
  std::size_t excluded = 0;
};

class EvalReport {
 public:
  std::string task;
  std::string dataset;
  std::string model;
  std::string config_hash;

  void add(EvalSample sample);
  const std::vector<EvalSample>& samples() const { return samples_; }
  std::map<std::string, MetricSummary> summary() const;
  nlohmann::json summary_json() const;

  /// Writes `path` (summary document) and the per-sample records next to it
  /// with extension .jsonl.
  void write(const std::filesystem::path& path) const;
  static EvalReport read(const std::filesystem::path& path);
  static std::filesystem::path records_path(const std::filesystem::path& path);

 private:
  std::vector<EvalSample> samples_;
};

void to_json(nlohmann::json& j, const EvalSample& s);
void from_json(const nlohmann::json& j, EvalSample& s);

}  // namespace uvmakeup::metrics
