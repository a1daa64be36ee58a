#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/core/rng.hpp"
#include "uvmakeup/uvgeom/face_model.hpp"

namespace uvmakeup::synth {

using Rgb = std::array<float, 3>;

/// Appearance and pose of one synthetic subject.
struct SubjectParams {
  std::uint64_t id = 0;
  Rgb skin{0.80f, 0.62f, 0.52f};
  Rgb lips{0.70f, 0.38f, 0.38f};
  Rgb iris{0.30f, 0.20f, 0.12f};
  Rgb brows{0.20f, 0.14f, 0.10f};
  Rgb backdrop{0.16f, 0.42f, 0.58f};
  std::uint64_t noise_seed = 0;
  uvgeom::HeadPose pose{};
};

/// Cosmetic color style. Strengths are blend weights in [0,1].
struct MakeupStyle {
  std::uint64_t id = 0;
  Rgb lip_color{0.75f, 0.05f, 0.15f};
  float lip_strength = 0.8f;
  Rgb eyeshadow_color{0.35f, 0.15f, 0.45f};
  float eyeshadow_strength = 0.6f;
  Rgb blush_color{0.90f, 0.40f, 0.45f};
  float blush_strength = 0.3f;
  Rgb foundation_color{0.90f, 0.75f, 0.65f};
  float foundation_strength = 0.2f;
};

struct PoseRange {
  double max_yaw_deg = 20.0;
  double max_roll_deg = 8.0;
  double min_scale = 95.0;
  double max_scale = 105.0;
  double max_shift = 6.0;
};

SubjectParams random_subject(std::uint64_t id, std::uint64_t seed, const PoseRange& range = {});
MakeupStyle random_style(std::uint64_t id, std::uint64_t seed);

/// Bare-face albedo texture in the layout's UV space.
TextureMap face_texture(const SubjectParams& subject, const uvgeom::UvLayout& layout);

/// Applies lip, eye-shadow, blush and foundation color in UV space.
TextureMap apply_makeup(const TextureMap& bare, const MakeupStyle& style,
                        const uvgeom::UvLayout& layout);

/// Near-uniform studio backdrop with a faint vertical gradient.
Image backdrop(int height, int width, const Rgb& color, std::uint64_t seed);

struct RenderedSubject {
  Image image;
  uvgeom::PositionMap position;
  TextureMap texture;
};

/// Renders a textured subject over its backdrop at the subject's pose.
RenderedSubject render_subject(const SubjectParams& subject, const TextureMap& texture,
                               const uvgeom::ParametricFace& face, int image_size = 256);

nlohmann::json to_json(const MakeupStyle& style);
nlohmann::json to_json(const SubjectParams& subject);

}  // namespace uvmakeup::synth
