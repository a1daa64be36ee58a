#include "uvmakeup/synth/face_synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uvmakeup/uvgeom/render.hpp"

namespace uvmakeup::synth {
namespace {

using uvgeom::Ellipse;
using uvgeom::UvLayout;

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// Soft inside-ellipse weight with a feather of `soft` in normalized radius.
double inside(const Ellipse& e, double s, double t, double soft = 0.15) {
  return 1.0 - smoothstep(1.0 - soft, 1.0 + soft, e.radius(s, t));
}

/// Smooth value noise on a lattice of `cells` per unit, sampled in [-1,1]^2.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, int cells) : cells_(cells), lattice_((cells + 2) * (cells + 2)) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(cells));
    for (double& v : lattice_) v = uniform(rng, -1.0, 1.0);
  }

  double operator()(double s, double t) const {
    const double x = (s + 1.0) * 0.5 * cells_;
    const double y = (t + 1.0) * 0.5 * cells_;
    const int x0 = std::clamp(static_cast<int>(x), 0, cells_);
    const int y0 = std::clamp(static_cast<int>(y), 0, cells_);
    const double fx = smoothstep(0.0, 1.0, x - x0);
    const double fy = smoothstep(0.0, 1.0, y - y0);
    auto at = [&](int xi, int yi) { return lattice_[yi * (cells_ + 2) + xi]; };
    const double a = at(x0, y0) + (at(x0 + 1, y0) - at(x0, y0)) * fx;
    const double b = at(x0, y0 + 1) + (at(x0 + 1, y0 + 1) - at(x0, y0 + 1)) * fx;
    return a + (b - a) * fy;
  }

 private:
  int cells_;
  std::vector<double> lattice_;
};

Rgb mix(const Rgb& a, const Rgb& b, double w) {
  return {static_cast<float>(a[0] + (b[0] - a[0]) * w), static_cast<float>(a[1] + (b[1] - a[1]) * w),
          static_cast<float>(a[2] + (b[2] - a[2]) * w)};
}

Rgb random_color(Rng& rng, const Rgb& lo, const Rgb& hi) {
  return {static_cast<float>(uniform(rng, lo[0], hi[0])), static_cast<float>(uniform(rng, lo[1], hi[1])),
          static_cast<float>(uniform(rng, lo[2], hi[2]))};
}

// Feature geometry inside the cosmetic regions.
const Ellipse kLipShape{0.0, 0.5, 0.17, 0.065};
const std::array<Ellipse, 2> kSclera{Ellipse{-0.36, -0.13, 0.1, 0.045}, Ellipse{0.36, -0.13, 0.1, 0.045}};
const std::array<Ellipse, 2> kIris{Ellipse{-0.36, -0.13, 0.038, 0.038}, Ellipse{0.36, -0.13, 0.038, 0.038}};
const std::array<Ellipse, 2> kPupil{Ellipse{-0.36, -0.13, 0.016, 0.016}, Ellipse{0.36, -0.13, 0.016, 0.016}};
const std::array<Ellipse, 2> kLid{Ellipse{-0.36, -0.19, 0.17, 0.08}, Ellipse{0.36, -0.19, 0.17, 0.08}};

}  // namespace

SubjectParams random_subject(std::uint64_t id, std::uint64_t seed, const PoseRange& range) {
  Rng rng = make_rng(seed, id);
  SubjectParams p;
  p.id = id;
  // Skin tones from deep to light along a warm ramp.
  const double tone = uniform(rng);
  p.skin = mix(Rgb{0.42f, 0.27f, 0.19f}, Rgb{0.93f, 0.78f, 0.68f}, tone);
  p.skin = mix(p.skin, random_color(rng, {0.6f, 0.45f, 0.35f}, {0.95f, 0.8f, 0.7f}), 0.15);
  p.lips = mix(p.skin, Rgb{0.62f, 0.28f, 0.30f}, uniform(rng, 0.45, 0.7));
  p.iris = random_color(rng, {0.1f, 0.08f, 0.05f}, {0.45f, 0.4f, 0.35f});
  p.brows = mix(p.skin, Rgb{0.1f, 0.07f, 0.05f}, uniform(rng, 0.6, 0.9));
  p.backdrop = random_color(rng, {0.05f, 0.30f, 0.45f}, {0.2f, 0.55f, 0.75f});
  p.noise_seed = rng();
  p.pose.yaw_deg = uniform(rng, -range.max_yaw_deg, range.max_yaw_deg);
  p.pose.roll_deg = uniform(rng, -range.max_roll_deg, range.max_roll_deg);
  p.pose.scale = uniform(rng, range.min_scale, range.max_scale);
  p.pose.center_x = 127.5 + uniform(rng, -range.max_shift, range.max_shift);
  p.pose.center_y = 127.5 + uniform(rng, -range.max_shift, range.max_shift);
  return p;
}

MakeupStyle random_style(std::uint64_t id, std::uint64_t seed) {
  Rng rng = make_rng(seed ^ 0x5717E5ULL, id);
  MakeupStyle s;
  s.id = id;
  s.lip_color = random_color(rng, {0.35f, 0.0f, 0.05f}, {0.95f, 0.35f, 0.45f});
  s.lip_strength = static_cast<float>(uniform(rng, 0.55, 0.95));
  s.eyeshadow_color = random_color(rng, {0.1f, 0.05f, 0.1f}, {0.7f, 0.5f, 0.7f});
  s.eyeshadow_strength = static_cast<float>(uniform(rng, 0.35, 0.8));
  s.blush_color = random_color(rng, {0.8f, 0.3f, 0.3f}, {1.0f, 0.6f, 0.6f});
  s.blush_strength = static_cast<float>(uniform(rng, 0.1, 0.4));
  s.foundation_color = random_color(rng, {0.6f, 0.45f, 0.35f}, {0.95f, 0.82f, 0.72f});
  s.foundation_strength = static_cast<float>(uniform(rng, 0.05, 0.3));
  return s;
}

TextureMap face_texture(const SubjectParams& subject, const UvLayout& layout) {
  const int n = layout.size();
  TextureMap tex(n, n);
  const ValueNoise coarse(subject.noise_seed, 6);
  const ValueNoise fine(subject.noise_seed + 1, 24);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (!layout.valid(v, u)) continue;
      const double s = layout.s_of(u);
      const double t = layout.t_of(v);
      const double rim = UvLayout::face_outline().radius(s, t);
      const double shade = 1.0 - 0.18 * smoothstep(0.55, 1.0, rim);
      const double grain = 1.0 + 0.05 * coarse(s, t) + 0.02 * fine(s, t);
      Rgb c = subject.skin;
      // Natural cheek warmth.
      for (const auto& cheek : UvLayout::cheek_regions()) {
        c = mix(c, Rgb{subject.skin[0], subject.skin[1] * 0.88f, subject.skin[2] * 0.88f},
                0.35 * inside(cheek, s, t, 0.5));
      }
      // Nose side shading.
      const double nose_side = std::exp(-std::pow((std::abs(s) - 0.07) / 0.04, 2.0) -
                                        std::pow((t - 0.12) / 0.18, 2.0));
      c = mix(c, Rgb{c[0] * 0.85f, c[1] * 0.82f, c[2] * 0.82f}, 0.6 * nose_side);
      for (const auto& brow : UvLayout::brows()) c = mix(c, subject.brows, inside(brow, s, t, 0.3));
      for (int e = 0; e < 2; ++e) {
        c = mix(c, Rgb{c[0] * 0.8f, c[1] * 0.75f, c[2] * 0.75f}, 0.4 * inside(kLid[e], s, t, 0.3));
        c = mix(c, Rgb{0.93f, 0.92f, 0.9f}, inside(kSclera[e], s, t, 0.2));
        c = mix(c, subject.iris, inside(kIris[e], s, t, 0.2));
        c = mix(c, Rgb{0.04f, 0.03f, 0.03f}, inside(kPupil[e], s, t, 0.3));
      }
      c = mix(c, subject.lips, inside(kLipShape, s, t, 0.2));
      const double mouth_line = std::exp(-std::pow((t - 0.5) / 0.008, 2.0)) * inside(kLipShape, s, t, 0.1);
      c = mix(c, Rgb{c[0] * 0.5f, c[1] * 0.4f, c[2] * 0.4f}, 0.8 * mouth_line);
      float* out = tex.pixel(v, u);
      for (int k = 0; k < 3; ++k) {
        out[k] = static_cast<float>(std::clamp(c[k] * shade * grain, 0.0, 1.0));
      }
    }
  }
  return tex;
}

TextureMap apply_makeup(const TextureMap& bare, const MakeupStyle& style, const UvLayout& layout) {
  const int n = layout.size();
  require(bare.height() == n && bare.width() == n, ErrorCategory::shape_mismatch,
          "apply_makeup: texture does not match layout");
  TextureMap out = bare;
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (!layout.valid(v, u)) continue;
      const double s = layout.s_of(u);
      const double t = layout.t_of(v);
      float* p = out.pixel(v, u);
      Rgb c{p[0], p[1], p[2]};
      const double lum = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
      // Foundation shifts the overall skin tone outside the eyes and lips.
      double feature = inside(kLipShape, s, t, 0.2);
      for (int e = 0; e < 2; ++e) feature = std::max(feature, inside(kSclera[e], s, t, 0.3));
      c = mix(c, style.foundation_color, style.foundation_strength * (1.0 - feature));
      for (const auto& cheek : UvLayout::cheek_regions()) {
        c = mix(c, style.blush_color, style.blush_strength * inside(cheek, s, t, 0.6));
      }
      for (int e = 0; e < 2; ++e) {
        const double lid = inside(kLid[e], s, t, 0.35) * (1.0 - inside(kSclera[e], s, t, 0.3));
        c = mix(c, style.eyeshadow_color, style.eyeshadow_strength * lid);
      }
      // Lipstick keeps some of the underlying shading.
      const double lw = style.lip_strength * inside(kLipShape, s, t, 0.2);
      const Rgb lip{static_cast<float>(style.lip_color[0] * (0.6 + 0.6 * lum)),
                    static_cast<float>(style.lip_color[1] * (0.6 + 0.6 * lum)),
                    static_cast<float>(style.lip_color[2] * (0.6 + 0.6 * lum))};
      c = mix(c, lip, lw);
      for (int k = 0; k < 3; ++k) p[k] = std::clamp(c[k], 0.0f, 1.0f);
    }
  }
  return out;
}

Image backdrop(int height, int width, const Rgb& color, std::uint64_t seed) {
  Image img(height, width);
  Rng rng = make_rng(seed, 0xBAC);
  const double tilt = uniform(rng, -0.015, 0.015);
  for (int y = 0; y < height; ++y) {
    const double g = tilt * (2.0 * y / (height - 1) - 1.0);
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(std::clamp(color[c] + g, 0.0, 1.0));
      }
    }
  }
  return img;
}

RenderedSubject render_subject(const SubjectParams& subject, const TextureMap& texture,
                               const uvgeom::ParametricFace& face, int image_size) {
  RenderedSubject out;
  out.position = face.pose(subject.pose);
  out.texture = texture;
  const Image bg = backdrop(image_size, image_size, subject.backdrop, subject.noise_seed);
  out.image = uvgeom::render(out.position, texture, bg).image;
  return out;
}

nlohmann::json to_json(const MakeupStyle& s) {
  return {{"id", s.id},
          {"lip_color", s.lip_color},
          {"lip_strength", s.lip_strength},
          {"eyeshadow_color", s.eyeshadow_color},
          {"eyeshadow_strength", s.eyeshadow_strength},
          {"blush_color", s.blush_color},
          {"blush_strength", s.blush_strength},
          {"foundation_color", s.foundation_color},
          {"foundation_strength", s.foundation_strength}};
}

nlohmann::json to_json(const SubjectParams& p) {
  return {{"id", p.id},
          {"skin", p.skin},
          {"yaw_deg", p.pose.yaw_deg},
          {"roll_deg", p.pose.roll_deg},
          {"scale", p.pose.scale},
          {"center", {p.pose.center_x, p.pose.center_y}}};
}

}  // namespace uvmakeup::synth
