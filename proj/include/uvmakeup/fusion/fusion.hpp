#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::fusion {

using uvgeom::Region;

enum class PatternSource { first, second };

/// Per-request switches for the transfer pipeline.
struct TransferRequest {
  bool use_color = true;
  bool use_pattern = true;
  /// Weight of the (first) transferred style. 1 applies it fully.
  double alpha = 1.0;
  /// When set, the style is applied only inside `regions`.
  bool partial = false;
  std::vector<Region> regions;
  /// Whose pattern mask survives when two references are given.
  PatternSource pattern_source = PatternSource::first;
  std::uint64_t seed = 0;

  void validate(bool has_second_reference = false) const;
};

void to_json(nlohmann::json& j, const TransferRequest& r);
void from_json(const nlohmann::json& j, TransferRequest& r);

/// T = t_ref * mask + t_color * (1 - mask), texelwise.
TextureMap fuse(const TextureMap& t_ref, const TextureMap& t_color, const PatternMask& mask);

/// alpha * t_a + (1 - alpha) * t_b.
TextureMap interpolate(const TextureMap& t_a, const TextureMap& t_b, double alpha);

/// Selected regions, optionally widened to the whole valid face.
struct RegionSelection {
  std::vector<Region> regions;
  bool full_face = false;
};

/// Union (texelwise max) of the selected soft masks.
SoftMask selection_mask(const uvgeom::RegionMaskSet& masks, const RegionSelection& sel,
                        const Plane* valid = nullptr);

/// M * t_full + (1 - M) * t_src with M the selection mask.
TextureMap partial_apply(const TextureMap& t_src, const TextureMap& t_full,
                         const uvgeom::RegionMaskSet& masks, const RegionSelection& sel,
                         const Plane* valid = nullptr);

}  // namespace uvmakeup::fusion
