#pragma once

#include <array>
#include <cstdint>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::color {

inline constexpr int kHistogramBins = 256;
inline constexpr float kMaskThreshold = 0.5f;

struct HistogramMatch {
  TextureMap texture;
  /// True when the thresholded mask selected no texel; `texture` is then the source.
  bool empty_region = false;
};

/// Per-channel CDF matching of the source's masked values onto the
/// reference's masked distribution. Values are quantized to 256 bins; each
/// source bin maps to the smallest reference bin whose cumulative count
/// reaches the source bin's cumulative count. Texels where mask <= 0.5 keep
/// their source value.
HistogramMatch histogram_match(const TextureMap& source, const TextureMap& reference,
                               const SoftMask& mask);

/// 256-bin quantization used by the matcher.
inline int quantize(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<int>(c * 255.0f + 0.5f);
}

/// Normalized per-channel histograms of the thresholded masked region.
std::array<std::array<double, kHistogramBins>, 3> masked_histogram(const TextureMap& tex,
                                                                   const SoftMask& mask);

}  // namespace uvmakeup::color
