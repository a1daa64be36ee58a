#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::uvgeom {

/// UV-indexed camera-space XYZ raster plus validity mask. X and Y are image
/// pixel coordinates (integer = pixel center); Z grows toward the camera.
class PositionMap {
 public:
  PositionMap() = default;
  PositionMap(int height, int width)
      : height_(height), width_(width),
        xyz_(static_cast<std::size_t>(height) * width * 3, 0.0f),
        valid_(static_cast<std::size_t>(height) * width, 0) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return valid_.empty(); }

  float* point(int v, int u) { return xyz_.data() + index(v, u) * 3; }
  const float* point(int v, int u) const { return xyz_.data() + index(v, u) * 3; }
  bool valid(int v, int u) const { return valid_[index(v, u)] != 0; }
  void set_valid(int v, int u, bool on) { valid_[index(v, u)] = on ? 1 : 0; }

  std::vector<float>& xyz() noexcept { return xyz_; }
  const std::vector<float>& xyz() const noexcept { return xyz_; }
  const std::vector<std::uint8_t>& valid_mask() const noexcept { return valid_; }
  std::vector<std::uint8_t>& valid_mask() noexcept { return valid_; }

  std::size_t valid_count() const;
  Plane valid_plane() const;

  template <int C>
  bool same_uv_size(const Raster<C>& r) const {
    return r.height() == height_ && r.width() == width_;
  }

  friend bool operator==(const PositionMap&, const PositionMap&) = default;

 private:
  std::size_t index(int v, int u) const noexcept {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> xyz_;
  std::vector<std::uint8_t> valid_;
};

/// Validates finiteness and that rounded XY of valid texels lies inside an
/// image of the given size. Throws geometry_mismatch otherwise.
void check_fits_image(const PositionMap& pos, int image_height, int image_width);

/// "UVPM" | u32 width | u32 height | planar f32 X,Y,Z | u8 validity (all LE).
std::vector<std::uint8_t> encode_uvpm(const PositionMap& pos);
PositionMap decode_uvpm(const std::vector<std::uint8_t>& bytes);
void write_uvpm(const std::filesystem::path& path, const PositionMap& pos);
PositionMap read_uvpm(const std::filesystem::path& path);

}  // namespace uvmakeup::uvgeom
