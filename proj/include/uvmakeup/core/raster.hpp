#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uvmakeup/core/error.hpp"

namespace uvmakeup {

/// Row-major, channel-interleaved float raster with a compile-time channel count.
template <int Channels>
class Raster {
 public:
  static constexpr int channels = Channels;

  Raster() = default;
  Raster(int height, int width, float fill = 0.0f)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width * Channels, fill) {
    require(height >= 1 && width >= 1, ErrorCategory::invalid_argument,
            "raster dimensions must be positive");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  float* pixel(int y, int x) { return data_.data() + index(y, x, 0); }
  const float* pixel(int y, int x) const { return data_.data() + index(y, x, 0); }

  template <int C>
  bool same_size(const Raster<C>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

using Plane = Raster<1>;
using RgbRaster = Raster<3>;

/// Face photo domain: H x W x 3 in [0,1].
class Image : public RgbRaster {
 public:
  using RgbRaster::RgbRaster;
  Image() = default;
  explicit Image(RgbRaster r) : RgbRaster(std::move(r)) {}
};

/// UV-indexed color raster. Texels outside the layout's valid region are zero.
class TextureMap : public RgbRaster {
 public:
  using RgbRaster::RgbRaster;
  TextureMap() = default;
  explicit TextureMap(RgbRaster r) : RgbRaster(std::move(r)) {}
};

/// Soft single-channel mask with weights in [0,1].
using SoftMask = Plane;
using PatternMask = Plane;

template <int A, int B>
void require_same_size(const Raster<A>& a, const Raster<B>& b, const std::string& what) {
  if (!a.same_size(b)) {
    fail(ErrorCategory::shape_mismatch,
         what + ": size mismatch " + std::to_string(a.height()) + "x" +
             std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
             std::to_string(b.width()));
  }
}

/// Clamp every value into [0,1] in place.
template <int C>
void clamp_unit(Raster<C>& r) {
  for (float& v : r.values()) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

}  // namespace uvmakeup
