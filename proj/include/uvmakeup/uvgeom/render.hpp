#pragma once

#include <cstdint>
#include <vector>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/uvgeom/position_map.hpp"

namespace uvmakeup::uvgeom {

/// Winning fragment per image pixel after z-buffered rasterization of the UV
/// mesh (every fully valid 2x2 texel quad split into two triangles).
struct Fragment {
  float depth;
  std::int32_t texel[3];  // flat UV indices v * width + u
  float weight[3];        // barycentric weights
};

struct RasterResult {
  int height = 0;
  int width = 0;
  std::vector<Fragment> fragments;
  std::vector<std::uint8_t> covered;
  std::size_t triangles = 0;

  bool is_covered(int y, int x) const { return covered[static_cast<std::size_t>(y) * width + x] != 0; }
  const Fragment& at(int y, int x) const { return fragments[static_cast<std::size_t>(y) * width + x]; }
  Plane coverage_plane() const;
};

RasterResult rasterize(const PositionMap& pos, int height, int width);

struct RenderOptions {
  /// Gaussian sigma (pixels) of the inward feather on the coverage boundary.
  double feather_sigma = 3.0;
};

struct RenderResult {
  Image image;
  Plane coverage;  // 1 where the face mesh covers the pixel
  Plane alpha;     // compositing weight actually used
  bool empty_face = false;
};

/// Renders `tex` through `pos` over `background` (which fixes the output size).
/// Outside coverage the output equals the background exactly.
RenderResult render(const PositionMap& pos, const TextureMap& tex, const Image& background,
                    const RenderOptions& options = {});

}  // namespace uvmakeup::uvgeom
