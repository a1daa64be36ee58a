#include "uvmakeup/uvgeom/uv_layout.hpp"

#include <algorithm>
#include <cmath>

namespace uvmakeup::uvgeom {
namespace {

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double soft_inside(const Ellipse& e, double s, double t) {
  return 1.0 - smoothstep(0.8, 1.2, e.radius(s, t));
}

}  // namespace

double Ellipse::radius(double s, double t) const {
  const double a = (s - cs) / rs;
  const double b = (t - ct) / rt;
  return std::sqrt(a * a + b * b);
}

std::string region_name(Region r) {
  switch (r) {
    case Region::eyes: return "eyes";
    case Region::lips: return "lips";
    case Region::skin: return "skin";
  }
  return "?";
}

Region parse_region(const std::string& name) {
  if (name == "eyes") return Region::eyes;
  if (name == "lips") return Region::lips;
  if (name == "skin") return Region::skin;
  fail(ErrorCategory::invalid_argument, "unknown region '" + name + "' (expected lips, eyes, skin)");
}

const SoftMask& RegionMaskSet::get(Region r) const {
  switch (r) {
    case Region::eyes: return eyes;
    case Region::lips: return lips;
    case Region::skin: return skin;
  }
  return skin;
}

const Ellipse& UvLayout::face_outline() {
  static const Ellipse e{0.0, 0.0, 0.9, 0.92};
  return e;
}

const std::array<Ellipse, 2>& UvLayout::eye_regions() {
  static const std::array<Ellipse, 2> e{Ellipse{-0.36, -0.14, 0.2, 0.12},
                                        Ellipse{0.36, -0.14, 0.2, 0.12}};
  return e;
}

const Ellipse& UvLayout::lip_region() {
  static const Ellipse e{0.0, 0.5, 0.25, 0.11};
  return e;
}

const std::array<Ellipse, 2>& UvLayout::cheek_regions() {
  static const std::array<Ellipse, 2> e{Ellipse{-0.48, 0.22, 0.2, 0.2},
                                        Ellipse{0.48, 0.22, 0.2, 0.2}};
  return e;
}

const std::array<Ellipse, 2>& UvLayout::brows() {
  static const std::array<Ellipse, 2> e{Ellipse{-0.36, -0.36, 0.2, 0.045},
                                        Ellipse{0.36, -0.36, 0.2, 0.045}};
  return e;
}

UvLayout::UvLayout(int size) : size_(size), valid_(size, size) {
  require(size >= 4, ErrorCategory::invalid_argument, "UV layout size must be at least 4");
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      valid_.at(v, u) = face_outline().radius(s_of(u), t_of(v)) <= 1.0 ? 1.0f : 0.0f;
    }
  }
}

double UvLayout::cheek_diameter() const { return 2.0 * cheek_regions()[0].rs * 0.5 * size_; }

std::array<int, 4> UvLayout::valid_bbox() const {
  int u0 = size_, v0 = size_, u1 = -1, v1 = -1;
  for (int v = 0; v < size_; ++v) {
    for (int u = 0; u < size_; ++u) {
      if (!valid(v, u)) continue;
      u0 = std::min(u0, u);
      v0 = std::min(v0, v);
      u1 = std::max(u1, u);
      v1 = std::max(v1, v);
    }
  }
  return {u0, v0, u1, v1};
}

RegionMaskSet UvLayout::region_masks() const {
  RegionMaskSet set{SoftMask(size_, size_), SoftMask(size_, size_), SoftMask(size_, size_)};
  for (int v = 0; v < size_; ++v) {
    for (int u = 0; u < size_; ++u) {
      if (!valid(v, u)) continue;
      const double s = s_of(u);
      const double t = t_of(v);
      const double eyes =
          std::max(soft_inside(eye_regions()[0], s, t), soft_inside(eye_regions()[1], s, t));
      const double lips = soft_inside(lip_region(), s, t);
      set.eyes.at(v, u) = static_cast<float>(eyes);
      set.lips.at(v, u) = static_cast<float>(lips);
      set.skin.at(v, u) = static_cast<float>(std::max(0.0, 1.0 - eyes - lips));
    }
  }
  return set;
}

RegionMaskSet universal_region_masks(int size) { return UvLayout(size).region_masks(); }

}  // namespace uvmakeup::uvgeom
