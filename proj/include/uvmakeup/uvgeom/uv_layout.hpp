#pragma once

#include <array>
#include <string>
#include <vector>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::uvgeom {

/// Axis-aligned ellipse in normalized UV coordinates, s and t in [-1,1]
/// (s grows with u to the right, t grows with v downward).
struct Ellipse {
  double cs;
  double ct;
  double rs;
  double rt;

  /// Normalized radius; 1 on the boundary.
  double radius(double s, double t) const;
};

enum class Region { eyes, lips, skin };

std::string region_name(Region r);
Region parse_region(const std::string& name);

/// Universal cosmetic region masks in UV space.
struct RegionMaskSet {
  SoftMask eyes;
  SoftMask lips;
  SoftMask skin;

  const SoftMask& get(Region r) const;
};

/// Fixed UV parameterization annotation shared by every face. All semantic
/// positions are stated in normalized coordinates so the layout scales with
/// the UV resolution.
class UvLayout {
 public:
  static constexpr int kDefaultSize = 256;

  explicit UvLayout(int size = kDefaultSize);

  int size() const noexcept { return size_; }

  double s_of(int u) const { return (u + 0.5) / size_ * 2.0 - 1.0; }
  double t_of(int v) const { return (v + 0.5) / size_ * 2.0 - 1.0; }
  double u_of(double s) const { return (s + 1.0) * 0.5 * size_ - 0.5; }
  double v_of(double t) const { return (t + 1.0) * 0.5 * size_ - 0.5; }

  bool valid(int v, int u) const { return valid_.at(v, u) > 0.5f; }
  const Plane& valid_plane() const noexcept { return valid_; }

  static const Ellipse& face_outline();
  static const std::array<Ellipse, 2>& eye_regions();
  static const Ellipse& lip_region();
  static const std::array<Ellipse, 2>& cheek_regions();
  static const std::array<Ellipse, 2>& brows();

  /// Cheek diameter in UV texels (width of one cheek region).
  double cheek_diameter() const;

  /// Bounding box of the valid region, texel units: {u0, v0, u1, v1} inclusive.
  std::array<int, 4> valid_bbox() const;

  /// Soft masks: eyes and lips feather across normalized radius [0.8, 1.2];
  /// skin is the valid remainder. Masks are disjoint at threshold 0.5.
  RegionMaskSet region_masks() const;

 private:
  int size_;
  Plane valid_;
};

/// Layout-independent convenience for the default 256x256 layout.
RegionMaskSet universal_region_masks(int size = UvLayout::kDefaultSize);

}  // namespace uvmakeup::uvgeom
