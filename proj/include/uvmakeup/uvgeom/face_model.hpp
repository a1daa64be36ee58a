#pragma once

#include <array>
#include <vector>

#include "uvmakeup/uvgeom/position_map.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::uvgeom {

/// Orthographic head pose: yaw about the vertical axis, then roll about the
/// view axis, then scale (pixels per model unit) and image-space translation.
struct HeadPose {
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
  double scale = 78.0;
  double center_x = 127.5;
  double center_y = 127.5;
};

/// Parametric face surface: an ellipsoidal patch with a nose ridge, indexed by
/// the fixed UV layout. Model axes: x right, y down, z toward the camera.
class ParametricFace {
 public:
  explicit ParametricFace(int uv_size = UvLayout::kDefaultSize);

  const UvLayout& layout() const noexcept { return layout_; }
  int uv_size() const noexcept { return layout_.size(); }

  std::array<double, 3> model_point(int v, int u) const;

  /// Position map of the surface under `pose`. Invalid texels hold zeros.
  PositionMap pose(const HeadPose& pose) const;

 private:
  UvLayout layout_;
  std::vector<std::array<double, 3>> points_;
};

}  // namespace uvmakeup::uvgeom
