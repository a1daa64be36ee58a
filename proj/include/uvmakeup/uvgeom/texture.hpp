#pragma once

#include <cstddef>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/uvgeom/position_map.hpp"

namespace uvmakeup::uvgeom {

struct TextureExtraction {
  TextureMap texture;
  /// 1 where the texel was directly visible and sampled; 0 where it was
  /// self-occluded and filled from the nearest visible texel, or invalid.
  Plane visibility;
  std::size_t occluded = 0;
};

/// Samples `image` bilinearly at each valid texel's XY. Back-facing or
/// depth-occluded texels are inpainted from the nearest visible texel.
/// Throws geometry_mismatch when the position map does not fit the image.
TextureExtraction extract_texture(const Image& image, const PositionMap& pos);

/// Front-facing and depth-test visibility of each valid texel.
Plane texel_visibility(const PositionMap& pos, int image_height, int image_width);

/// Zeroes texels outside the valid region of `pos`.
void zero_outside_valid(TextureMap& tex, const PositionMap& pos);

}  // namespace uvmakeup::uvgeom
