#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::synth {

/// Straight (non-premultiplied) RGBA pattern, channels in [0,1].
struct Sticker {
  std::string name;
  Raster<4> rgba;

  static Sticker from_rgba8(std::string name, const io::Rgba8& pixels);
  io::Rgba8 to_rgba8() const;
};

enum class StickerShape { flower, star, heart, gem, leaf, swirl, dots, daisy };
inline constexpr int kStickerShapes = 8;

std::string shape_name(StickerShape s);

/// Procedural sticker: a saturated, high-contrast shape with antialiased
/// alpha, deterministic in (shape, seed).
Sticker make_sticker(StickerShape shape, std::uint64_t seed, int size = 128);

/// `n` procedural stickers cycling through the shapes.
std::vector<Sticker> make_sticker_set(int n, std::uint64_t seed, int size = 128);

/// Directory of RGBA PNGs listed in index.json ({"stickers":[{"name","file"}]}).
/// Without an index every *.png is considered. Files lacking an alpha channel
/// are skipped and reported in `rejected`.
struct StickerLibrary {
  std::vector<Sticker> stickers;
  std::vector<std::string> rejected;

  static StickerLibrary load(const std::filesystem::path& dir);
  static void save(const std::filesystem::path& dir, const std::vector<Sticker>& stickers);
};

/// Where and how strongly a sticker is applied in UV space.
struct PlacementParams {
  double scale = 1.0;      // sticker width / cheek diameter
  double center_u = 0.0;   // texel coordinates
  double center_v = 0.0;
  double opacity = 1.0;
  std::uint64_t seed = 0;  // stream the parameters were drawn from

  /// Throws invalid_argument for an off-face or central center, a scale
  /// outside [0.5,1.5] or an opacity outside [0,1].
  void validate(const uvgeom::UvLayout& layout) const;
};

nlohmann::json to_json(const PlacementParams& p);
PlacementParams placement_from_json(const nlohmann::json& j);

struct PlacementRange {
  /// Centers are kept within this normalized radius of the face outline.
  double max_radius = 0.75;
  double min_scale = 0.5;
  double max_scale = 1.5;
  double min_opacity = 0.6;
  double max_opacity = 1.0;
};

/// True inside the middle cell of a 3x3 split of the valid bounding box.
bool in_central_ninth(const uvgeom::UvLayout& layout, double u, double v);

/// Rejection-samples a center on a valid texel outside the central ninth and
/// within `max_radius` of the face outline.
PlacementParams draw_placement(std::uint64_t seed, const uvgeom::UvLayout& layout, const PlacementRange& range = {});

struct BlendResult {
  TextureMap texture;
  PatternMask mask;  // effective alpha = sticker alpha x opacity, zero off the valid region
};

/// Scales the sticker to width scale x cheek diameter, centers it at the
/// placement and alpha-composites it onto `tex` (premultiplied bilinear
/// sampling). Texels with zero effective alpha are returned bit-identical.
BlendResult blend_sticker(const TextureMap& tex, const Sticker& sticker, const PlacementParams& p);

}  // namespace uvmakeup::synth
