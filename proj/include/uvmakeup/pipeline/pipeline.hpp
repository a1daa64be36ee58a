#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "uvmakeup/color/color_net.hpp"
#include "uvmakeup/fusion/fusion.hpp"
#include "uvmakeup/metrics/metrics.hpp"
#include "uvmakeup/pattern/seg_net.hpp"
#include "uvmakeup/uvgeom/geometry_provider.hpp"

namespace uvmakeup::pipeline {

/// Immutable after construction; shared across concurrent transfers.
struct Models {
  std::shared_ptr<const uvgeom::GeometryProvider> geometry;
  std::shared_ptr<const color::ColorNet> color;
  std::shared_ptr<const pattern::SegNet> pattern;

  /// Throws model_missing when an enabled branch has no network.
  void require_for(const fusion::TransferRequest& req, bool mask_supplied = false) const;
};

inline constexpr int kModelsFormat = 1;

/// `dir/models.json` plus `color.uvmc` / `pattern.uvmc` for whichever nets are present.
void save_models(const Models& models, const std::filesystem::path& dir);

/// Loads everything before returning, so a bad file leaves no partial state.
/// A null `geometry` selects the silhouette-fit provider.
Models load_models(const std::filesystem::path& dir,
                   std::shared_ptr<const uvgeom::GeometryProvider> geometry = nullptr);

/// Parameter checksums keyed "color" / "pattern".
std::map<std::string, std::string> model_checksums(const Models& models);

struct Intermediates {
  uvgeom::PositionMap source_position;
  uvgeom::PositionMap reference_position;
  TextureMap source_texture;      // T_s^n
  TextureMap reference_texture;   // T_r^m
  std::optional<TextureMap> reference2_texture;
  TextureMap color_texture;       // after interpolation and region selection
  TextureMap pattern_texture;     // the reference texture supplying the pattern
  PatternMask mask;               // Gamma^m
  TextureMap fused;               // T_s^m
};

struct TransferResult {
  Image output;
  std::optional<Intermediates> intermediates;
  std::map<std::string, double> timings_ms;
  /// False when the pattern branch ran but no texel crossed 0.5.
  bool pattern_detected = false;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Reference-side work that depends only on the reference image.
struct PreparedReference {
  uvgeom::PositionMap position;
  TextureMap texture;
  /// Segmentation output; empty when not computed.
  PatternMask mask;
};

/// Geometry, texture and (when a segmentation model is loaded and
/// `with_mask`) the pattern mask of a reference image. `which` labels
/// geometry failures.
PreparedReference prepare_reference(const Image& reference, const Models& models, bool with_mask = true,
                                    const char* which = "reference");

struct TransferInputs {
  const Image* source = nullptr;
  const Image* reference = nullptr;
  const Image* reference2 = nullptr;
  /// Replaces the segmentation output when set.
  const PatternMask* mask_override = nullptr;
  bool keep_intermediates = false;
};

TransferResult transfer(const TransferInputs& in, const fusion::TransferRequest& req, const Models& models);

/// As above with the reference side already prepared. A prepared mask is
/// used in place of running segmentation.
TransferResult transfer_prepared(const Image& source, const PreparedReference& reference,
                                 const PreparedReference* reference2, const PatternMask* mask_override,
                                 const fusion::TransferRequest& req, const Models& models,
                                 bool keep_intermediates = false);

TransferResult transfer(const Image& source, const Image& reference, const fusion::TransferRequest& req,
                        const Models& models, bool keep_intermediates = false);

/// Writes each intermediate as PNG (textures, mask) and .uvpm (positions).
void dump_intermediates(const Intermediates& im, const std::filesystem::path& dir);

/// Segmentation quality on a synt1 split: per-sample mIoU and foreground IoU.
metrics::EvalReport evaluate_segmentation(const pattern::SegNet& net, const std::filesystem::path& dataset,
                                          const std::string& split = "test");

struct TransferEvalOptions {
  /// Substitute the stored ground-truth UV mask for the predicted one.
  bool ground_truth_mask = false;
  bool use_color = true;
  const metrics::FaceEmbedder* embedder = nullptr;
  int limit = 0;
};

/// MS-SSIM against ground truth on a synt2 root, plus identity similarity
/// between source and output when an embedder is given. Geometry comes from
/// the stored position-map sidecars.
metrics::EvalReport evaluate_transfer(const Models& models, const std::filesystem::path& dataset,
                                      const TransferEvalOptions& options = {});

}  // namespace uvmakeup::pipeline
