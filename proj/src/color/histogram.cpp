#include "uvmakeup/color/histogram.hpp"

#include <cmath>

namespace uvmakeup::color {

HistogramMatch histogram_match(const TextureMap& source, const TextureMap& reference,
                               const SoftMask& mask) {
  require_same_size(source, reference, "histogram_match");
  require_same_size(source, mask, "histogram_match mask");
  HistogramMatch out{source, false};

  const std::size_t n = source.pixel_count();
  const auto m = mask.values();
  const auto src = source.values();
  const auto ref = reference.values();
  std::int64_t selected = 0;
  for (std::size_t i = 0; i < n; ++i) selected += m[i] > kMaskThreshold ? 1 : 0;
  if (selected == 0) {
    out.empty_region = true;
    return out;
  }

  auto dst = out.texture.values();
  for (int c = 0; c < 3; ++c) {
    std::array<std::int64_t, kHistogramBins> cs{};
    std::array<std::int64_t, kHistogramBins> cr{};
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] <= kMaskThreshold) continue;
      require(std::isfinite(src[i * 3 + c]) && std::isfinite(ref[i * 3 + c]), ErrorCategory::numeric,
              "histogram_match: non-finite texel value");
      ++cs[quantize(src[i * 3 + c])];
      ++cr[quantize(ref[i * 3 + c])];
    }
    for (int b = 1; b < kHistogramBins; ++b) {
      cs[b] += cs[b - 1];
      cr[b] += cr[b - 1];
    }
    // Both regions hold `selected` texels, so cumulative counts compare directly.
    std::array<int, kHistogramBins> map{};
    int j = 0;
    for (int b = 0; b < kHistogramBins; ++b) {
      while (j < kHistogramBins - 1 && cr[j] < cs[b]) ++j;
      map[b] = j;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] <= kMaskThreshold) continue;
      dst[i * 3 + c] = static_cast<float>(map[quantize(src[i * 3 + c])]) / 255.0f;
    }
  }
  return out;
}

std::array<std::array<double, kHistogramBins>, 3> masked_histogram(const TextureMap& tex,
                                                                   const SoftMask& mask) {
  require_same_size(tex, mask, "masked_histogram");
  std::array<std::array<double, kHistogramBins>, 3> h{};
  const auto m = mask.values();
  const auto v = tex.values();
  double count = 0.0;
  for (std::size_t i = 0; i < tex.pixel_count(); ++i) {
    if (m[i] <= kMaskThreshold) continue;
    count += 1.0;
    for (int c = 0; c < 3; ++c) h[c][quantize(v[i * 3 + c])] += 1.0;
  }
  if (count > 0.0) {
    for (auto& ch : h)
      for (double& b : ch) b /= count;
  }
  return h;
}

}  // namespace uvmakeup::color
