#include "uvmakeup/uvgeom/face_model.hpp"

#include <cmath>
#include <numbers>

namespace uvmakeup::uvgeom {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMaxLongitude = 80.0 * kDeg;
constexpr double kMaxLatitude = 62.0 * kDeg;
constexpr double kHalfWidth = 1.0;
constexpr double kHalfHeight = 1.25;
constexpr double kDepth = 0.9;
constexpr double kNoseHeight = 0.2;

}  // namespace

ParametricFace::ParametricFace(int uv_size)
    : layout_(uv_size), points_(static_cast<std::size_t>(uv_size) * uv_size) {
  const Ellipse& outline = UvLayout::face_outline();
  for (int v = 0; v < uv_size; ++v) {
    for (int u = 0; u < uv_size; ++u) {
      const double s = layout_.s_of(u);
      const double t = layout_.t_of(v);
      const double lon = s / outline.rs * kMaxLongitude;
      const double lat = t / outline.rt * kMaxLatitude;
      const double ns = s / 0.09;
      const double nt = (t - 0.12) / 0.2;
      const double nose = kNoseHeight * std::exp(-ns * ns - nt * nt);
      points_[static_cast<std::size_t>(v) * uv_size + u] = {
          kHalfWidth * std::sin(lon) * std::cos(lat), kHalfHeight * std::sin(lat),
          kDepth * std::cos(lon) * std::cos(lat) + nose};
    }
  }
}

std::array<double, 3> ParametricFace::model_point(int v, int u) const {
  return points_[static_cast<std::size_t>(v) * layout_.size() + u];
}

PositionMap ParametricFace::pose(const HeadPose& pose) const {
  const int n = layout_.size();
  PositionMap out(n, n);
  const double cy = std::cos(pose.yaw_deg * kDeg);
  const double sy = std::sin(pose.yaw_deg * kDeg);
  const double cr = std::cos(pose.roll_deg * kDeg);
  const double sr = std::sin(pose.roll_deg * kDeg);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (!layout_.valid(v, u)) continue;
      const auto& p = points_[static_cast<std::size_t>(v) * n + u];
      // Yaw: positive turns the face toward +x.
      const double x1 = p[0] * cy + p[2] * sy;
      const double z1 = -p[0] * sy + p[2] * cy;
      const double y1 = p[1];
      // Roll in the image plane.
      const double x2 = x1 * cr - y1 * sr;
      const double y2 = x1 * sr + y1 * cr;
      float* q = out.point(v, u);
      q[0] = static_cast<float>(pose.center_x + pose.scale * x2);
      q[1] = static_cast<float>(pose.center_y + pose.scale * y2);
      q[2] = static_cast<float>(pose.scale * z1);
      out.set_valid(v, u, true);
    }
  }
  return out;
}

}  // namespace uvmakeup::uvgeom
