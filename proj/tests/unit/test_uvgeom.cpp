#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/synth/face_synth.hpp"
#include "uvmakeup/uvgeom/geometry_provider.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

using namespace uvmakeup;
using namespace uvmakeup::uvgeom;

namespace {

PositionMap identity_grid(const UvLayout& layout) {
  PositionMap pos(layout.size(), layout.size());
  for (int v = 0; v < layout.size(); ++v) {
    for (int u = 0; u < layout.size(); ++u) {
      float* p = pos.point(v, u);
      p[0] = static_cast<float>(u);
      p[1] = static_cast<float>(v);
      p[2] = 10.0f;
      pos.set_valid(v, u, layout.valid(v, u));
    }
  }
  return pos;
}

// Independent bilinear lookup with edge clamping.
std::array<float, 3> reference_sample(const Image& img, double x, double y) {
  auto px = [&](int yy, int xx, int c) {
    yy = std::clamp(yy, 0, img.height() - 1);
    xx = std::clamp(xx, 0, img.width() - 1);
    return static_cast<double>(img.at(yy, xx, c));
  };
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = px(y0, x0, c) * (1 - fx) + px(y0, x0 + 1, c) * fx;
    const double bot = px(y0 + 1, x0, c) * (1 - fx) + px(y0 + 1, x0 + 1, c) * fx;
    out[c] = static_cast<float>(top * (1 - fy) + bot * fy);
  }
  return out;
}

synth::RenderedSubject make_subject(std::uint64_t id, const HeadPose& pose, const ParametricFace& face) {
  synth::SubjectParams p = synth::random_subject(id, 11);
  p.pose = pose;
  return synth::render_subject(p, synth::face_texture(p, face.layout()), face);
}

}  // namespace

TEST_CASE("identity-grid extraction reproduces the image on the valid region") {
  const UvLayout layout(64);
  const Image img(uvtest::random_raster<3>(64, 64, 3));
  const auto ex = extract_texture(img, identity_grid(layout));
  CHECK(ex.occluded == 0);
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      for (int c = 0; c < 3; ++c) {
        CHECK(ex.texture.at(v, u, c) == (layout.valid(v, u) ? img.at(v, u, c) : 0.0f));
      }
    }
  }
}

TEST_CASE("constant image extracts to a constant texture") {
  const ParametricFace face;
  const PositionMap pos = face.pose(HeadPose{});
  const auto ex = extract_texture(Image(256, 256, 1.0f), pos);
  for (int v = 0; v < 256; v += 3) {
    for (int u = 0; u < 256; u += 3) {
      CHECK(ex.texture.at(v, u, 1) == (pos.valid(v, u) ? 1.0f : 0.0f));
    }
  }
}

TEST_CASE("extraction matches a brute-force per-texel bilinear oracle") {
  Image checker(256, 256);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      for (int c = 0; c < 3; ++c) checker.at(y, x, c) = (((x / 8) + (y / 8) + c) % 2) ? 0.9f : 0.1f;
  const ParametricFace face;
  const PositionMap pos = face.pose(HeadPose{12.0, 5.0, 80.0, 130.2, 124.7});
  const auto ex = extract_texture(checker, pos);
  std::size_t compared = 0;
  for (int v = 0; v < 256; ++v) {
    for (int u = 0; u < 256; ++u) {
      if (ex.visibility.at(v, u) <= 0.5f) continue;
      const float* p = pos.point(v, u);
      const auto ref = reference_sample(checker, p[0], p[1]);
      for (int c = 0; c < 3; ++c) REQUIRE(ex.texture.at(v, u, c) == doctest::Approx(ref[c]).epsilon(1e-5));
      ++compared;
    }
  }
  CHECK(compared > 20000);
}

TEST_CASE("position map outside the image is a geometry mismatch") {
  const ParametricFace face;
  const PositionMap pos = face.pose(HeadPose{});
  try {
    extract_texture(Image(100, 100), pos);
    FAIL("expected geometry mismatch");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::geometry_mismatch);
  }
}

TEST_CASE("render of a black texture over white") {
  const ParametricFace face;
  const PositionMap pos = face.pose(HeadPose{-8.0, 3.0, 78.0, 127.5, 127.5});
  const auto r = render(pos, TextureMap(256, 256, 0.0f), Image(256, 256, 1.0f));
  const Plane interior = ops::erode(r.coverage, 10);
  std::size_t inside = 0;
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      if (r.coverage.at(y, x) < 0.5f) {
        REQUIRE(r.image.at(y, x, 0) == 1.0f);
      } else if (interior.at(y, x) > 0.5f) {
        REQUIRE(r.image.at(y, x, 0) == 0.0f);
        ++inside;
      }
    }
  }
  CHECK(inside > 10000);
  CHECK_FALSE(r.empty_face);
}

TEST_CASE("z-buffer keeps the nearer triangle") {
  // Two separate quads (UV columns 0-1 and 3-4) projected onto the same pixels.
  PositionMap pos(2, 5);
  auto put = [&](int v, int u, float x, float y, float z) {
    float* p = pos.point(v, u);
    p[0] = x;
    p[1] = y;
    p[2] = z;
    pos.set_valid(v, u, true);
  };
  for (float z_far : {1.0f, 9.0f}) {
    const float z_near = 10.0f - z_far;
    put(0, 0, 2, 2, z_far);
    put(0, 1, 12, 2, z_far);
    put(1, 0, 2, 12, z_far);
    put(1, 1, 12, 12, z_far);
    put(0, 3, 2, 2, z_near);
    put(0, 4, 12, 2, z_near);
    put(1, 3, 2, 12, z_near);
    put(1, 4, 12, 12, z_near);
    TextureMap tex(2, 5);
    for (int v = 0; v < 2; ++v) {
      tex.at(v, 0, 0) = tex.at(v, 1, 0) = 1.0f;  // red quad
      tex.at(v, 3, 2) = tex.at(v, 4, 2) = 1.0f;  // blue quad
    }
    const auto raster = rasterize(pos, 16, 16);
    REQUIRE(raster.is_covered(7, 7));
    const Fragment& f = raster.at(7, 7);
    const bool blue_wins = z_near > z_far;
    const int u = f.texel[0] % 5;
    CHECK((u >= 3) == blue_wins);
    const auto img = render(pos, tex, Image(16, 16), RenderOptions{0.0}).image;
    CHECK(img.at(7, 7, blue_wins ? 2 : 0) == doctest::Approx(1.0f));
  }
}

TEST_CASE("rendering with no valid quads returns the background") {
  const Image bg(uvtest::random_raster<3>(20, 20, 9));
  const auto r = render(PositionMap(8, 8), TextureMap(8, 8), bg);
  CHECK(r.empty_face);
  CHECK(r.image.values().size() == bg.values().size());
  CHECK(static_cast<const RgbRaster&>(r.image) == static_cast<const RgbRaster&>(bg));
}

TEST_CASE("round trip through UV space preserves the face interior") {
  const ParametricFace face;
  for (std::uint64_t id : {1u, 2u}) {
    const auto subj = make_subject(id, HeadPose{id == 1 ? 14.0 : -9.0, 4.0, 79.0, 126.0, 129.0}, face);
    const auto ex = extract_texture(subj.image, subj.position);
    const auto back = render(subj.position, ex.texture, subj.image);
    const double p = ops::psnr(back.image, subj.image, ops::erode(back.coverage, 8));
    CAPTURE(p);
    CHECK(p >= 30.0);
  }
}

TEST_CASE("extracted texture is invariant to head rotation") {
  const ParametricFace face;
  const auto a = make_subject(3, HeadPose{-12.0, -4.0, 78.0, 127.5, 127.5}, face);
  const auto b = make_subject(3, HeadPose{15.0, 6.0, 80.0, 125.0, 130.0}, face);
  const auto ta = extract_texture(a.image, a.position);
  const auto tb = extract_texture(b.image, b.position);
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < 256; ++v)
    for (int u = 0; u < 256; ++u) {
      if (ta.visibility.at(v, u) < 0.5f || tb.visibility.at(v, u) < 0.5f) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(ta.texture.at(v, u, c) - tb.texture.at(v, u, c));
      n += 3;
    }
  const double mad = sum / static_cast<double>(n);
  CAPTURE(mad);
  CHECK(mad <= 0.05);
}

TEST_CASE("universal region masks are disjoint, contained and placed") {
  const UvLayout layout;
  const RegionMaskSet m = layout.region_masks();
  double lips_v = 0.0;
  double lips_w = 0.0;
  for (int v = 0; v < 256; ++v) {
    for (int u = 0; u < 256; ++u) {
      const int count = (m.eyes.at(v, u) > 0.5f) + (m.lips.at(v, u) > 0.5f) + (m.skin.at(v, u) > 0.5f);
      REQUIRE(count <= 1);
      if (!layout.valid(v, u)) {
        REQUIRE(m.eyes.at(v, u) == 0.0f);
        REQUIRE(m.lips.at(v, u) == 0.0f);
        REQUIRE(m.skin.at(v, u) == 0.0f);
      }
      lips_v += v * m.lips.at(v, u);
      lips_w += m.lips.at(v, u);
    }
  }
  const auto box = layout.valid_bbox();
  const double lower_third = box[1] + 2.0 * (box[3] - box[1]) / 3.0;
  CHECK(lips_v / lips_w >= lower_third);
}

TEST_CASE("uvpm encoding is bit-exact and round trips") {
  const ParametricFace face(32);
  const PositionMap pos = face.pose(HeadPose{5.0, 0.0, 10.0, 16.0, 16.0});
  const auto bytes = encode_uvpm(pos);
  REQUIRE(bytes.size() == 12 + 32 * 32 * 13);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UVPM");
  CHECK(bytes[4] == 32);
  CHECK(bytes[5] == 0);
  float x0 = 0.0f;
  std::memcpy(&x0, bytes.data() + 12, 4);
  CHECK(x0 == pos.point(0, 0)[0]);
  float z0 = 0.0f;
  std::memcpy(&z0, bytes.data() + 12 + 2 * 32 * 32 * 4, 4);
  CHECK(z0 == pos.point(0, 0)[2]);
  CHECK(bytes[12 + 32 * 32 * 12 + 16 * 32 + 16] == 1);
  CHECK(decode_uvpm(bytes) == pos);
  auto bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_uvpm(bad), Error);
}

TEST_CASE("silhouette fit recovers the synthetic pose") {
  const ParametricFace face;
  const SilhouetteFitProvider provider;
  for (std::uint64_t id = 0; id < 3; ++id) {
    const synth::SubjectParams p = synth::random_subject(id, 21);
    const auto subj = synth::render_subject(p, synth::face_texture(p, face.layout()), face);
    const PositionMap est = provider.estimate(subj.image);
    double err = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < 256; ++v)
      for (int u = 0; u < 256; ++u) {
        if (!subj.position.valid(v, u)) continue;
        err += std::hypot(est.point(v, u)[0] - subj.position.point(v, u)[0],
                          est.point(v, u)[1] - subj.position.point(v, u)[1]);
        ++n;
      }
    CAPTURE(id);
    CHECK(err / n < 3.0);
    CHECK(est == provider.estimate(subj.image));
  }
}

TEST_CASE("silhouette fit fails loudly without a face") {
  const SilhouetteFitProvider provider;
  try {
    provider.estimate(Image(256, 256, 0.3f));
    FAIL("expected geometry failure");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::geometry_failure);
  }
}

TEST_CASE("position map store returns registered maps and falls back") {
  const ParametricFace face;
  const Image img(uvtest::random_raster<3>(256, 256, 4));
  const PositionMap pos = face.pose(HeadPose{3.0, 0.0, 70.0, 120.0, 130.0});
  PositionMapStore store;
  CHECK_THROWS_AS(store.estimate(img), Error);
  store.add(img, pos);
  CHECK(store.estimate(img) == pos);

  PositionMapStore with_fallback(std::make_shared<FixedPoseProvider>(HeadPose{}));
  CHECK(with_fallback.estimate(img) == face.pose(HeadPose{}));
}

TEST_CASE("extraction and rendering are deterministic") {
  const ParametricFace face;
  const auto subj = make_subject(5, HeadPose{20.0, -6.0, 76.0, 127.0, 127.0}, face);
  const auto a = extract_texture(subj.image, subj.position);
  const auto b = extract_texture(subj.image, subj.position);
  CHECK(a.texture == b.texture);
  CHECK(a.occluded > 0);
  CHECK(render(subj.position, a.texture, subj.image).image == render(subj.position, b.texture, subj.image).image);
}
