#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_support.hpp"
#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/synth/face_synth.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

using namespace uvmakeup;
using namespace uvmakeup::synth;
using uvgeom::UvLayout;

namespace {

Sticker solid_sticker(float r, float g, float b, float a = 1.0f, int size = 32) {
  Sticker s{"solid", Raster<4>(size, size)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float* p = s.rgba.pixel(y, x);
      p[0] = r;
      p[1] = g;
      p[2] = b;
      p[3] = a;
    }
  return s;
}

PlacementParams cheek_placement(double opacity, double scale = 1.0) {
  const UvLayout layout;
  const auto& cheek = UvLayout::cheek_regions()[0];
  PlacementParams p;
  p.center_u = layout.u_of(cheek.cs);
  p.center_v = layout.v_of(cheek.ct);
  p.scale = scale;
  p.opacity = opacity;
  return p;
}

const FaceSet& shared_faces() {
  static const FaceSet faces = make_faces(12, 21);
  return faces;
}

const std::vector<Sticker>& shared_stickers() {
  static const std::vector<Sticker> s = make_sticker_set(8, 5, 64);
  return s;
}

}  // namespace

TEST_CASE("transparent blend leaves the texture unchanged") {
  const TextureMap tex = uvtest::random_texture(256, 256, 1);
  const auto r = blend_sticker(tex, solid_sticker(0, 0, 0), cheek_placement(0.0));
  CHECK(r.texture == tex);
  for (float v : r.mask.values()) REQUIRE(v == 0.0f);
}

TEST_CASE("opaque blend copies the sticker color onto its support") {
  const TextureMap tex = uvtest::random_texture(256, 256, 2);
  const auto r = blend_sticker(tex, solid_sticker(0.2f, 0.4f, 0.9f), cheek_placement(1.0));
  int support = 0;
  for (int v = 0; v < 256; ++v)
    for (int u = 0; u < 256; ++u) {
      if (r.mask.at(v, u) < 1.0f) continue;
      ++support;
      REQUIRE(r.texture.at(v, u, 0) == doctest::Approx(0.2f).epsilon(1e-6));
      REQUIRE(r.texture.at(v, u, 1) == doctest::Approx(0.4f).epsilon(1e-6));
      REQUIRE(r.texture.at(v, u, 2) == doctest::Approx(0.9f).epsilon(1e-6));
    }
  CHECK(support > 1000);
}

TEST_CASE("half opacity black on white gives mid gray") {
  const auto r = blend_sticker(TextureMap(256, 256, 1.0f), solid_sticker(0, 0, 0), cheek_placement(0.5));
  int support = 0;
  for (int v = 0; v < 256; ++v)
    for (int u = 0; u < 256; ++u) {
      if (r.mask.at(v, u) != 0.5f) continue;
      ++support;
      for (int c = 0; c < 3; ++c) REQUIRE(r.texture.at(v, u, c) == doctest::Approx(0.5f).epsilon(1e-6));
    }
  CHECK(support > 1000);
}

TEST_CASE("blending is exact where the mask is zero and the mask stays on the face") {
  const UvLayout layout;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TextureMap tex = uvtest::random_texture(256, 256, 100 + seed);
    const Sticker& st = shared_stickers()[seed % shared_stickers().size()];
    const auto r = blend_sticker(tex, st, draw_placement(seed, layout));
    int nonzero = 0;
    for (int v = 0; v < 256; ++v)
      for (int u = 0; u < 256; ++u) {
        const float m = r.mask.at(v, u);
        REQUIRE(m >= 0.0f);
        REQUIRE(m <= 1.0f);
        if (m == 0.0f) {
          for (int c = 0; c < 3; ++c) REQUIRE(r.texture.at(v, u, c) == tex.at(v, u, c));
        } else {
          ++nonzero;
          REQUIRE(layout.valid(v, u));
        }
      }
    CHECK(nonzero > 0);
  }
}

TEST_CASE("drawn placements respect the placement rules") {
  const UvLayout layout;
  const double cheek = layout.cheek_diameter();
  CHECK(cheek > 40.0);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const PlacementParams p = draw_placement(seed, layout);
    REQUIRE_NOTHROW(p.validate(layout));
    REQUIRE(p.scale >= 0.5);
    REQUIRE(p.scale <= 1.5);
    REQUIRE(p.opacity >= 0.6);
    REQUIRE(p.opacity <= 1.0);
    REQUIRE_FALSE(in_central_ninth(layout, p.center_u, p.center_v));
  }
  CHECK(draw_placement(9, layout).center_u == draw_placement(9, layout).center_u);
}

TEST_CASE("invalid placements are rejected") {
  const UvLayout layout;
  const TextureMap tex(256, 256);
  const Sticker st = solid_sticker(1, 0, 0);
  PlacementParams p = cheek_placement(1.0);
  p.center_u = 2.0;
  p.center_v = 2.0;
  CHECK_THROWS_AS(blend_sticker(tex, st, p), Error);
  p = cheek_placement(1.0);
  p.center_u = p.center_v = 127.5;
  CHECK(in_central_ninth(layout, 127.5, 127.5));
  CHECK_THROWS_AS(blend_sticker(tex, st, p), Error);
  CHECK_THROWS_AS(blend_sticker(tex, st, cheek_placement(1.0, 1.6)), Error);
  CHECK_THROWS_AS(blend_sticker(tex, st, cheek_placement(1.2)), Error);
}

TEST_CASE("procedural stickers are deterministic with a real alpha channel") {
  for (int k = 0; k < kStickerShapes; ++k) {
    const auto shape = static_cast<StickerShape>(k);
    const Sticker a = make_sticker(shape, 3, 64);
    CHECK(a.rgba == make_sticker(shape, 3, 64).rgba);
    double covered = 0.0;
    bool transparent_corner = a.rgba.at(0, 0, 3) == 0.0f;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const float al = a.rgba.at(y, x, 3);
        REQUIRE(al >= 0.0f);
        REQUIRE(al <= 1.0f);
        covered += al;
      }
    INFO(shape_name(shape));
    CHECK(transparent_corner);
    CHECK(covered > 0.1 * 64 * 64);
    CHECK(covered < 0.9 * 64 * 64);
  }
}

TEST_CASE("sticker library round trips and rejects alpha-less files") {
  const auto dir = uvtest::temp_dir("stickers");
  StickerLibrary::save(dir, shared_stickers());
  io::write_png(dir / "opaque.png", Image(16, 16, 0.5f));
  {
    auto j = nlohmann::json::parse(io::read_text(dir / "index.json"));
    j["stickers"].push_back({{"name", "opaque"}, {"file", "opaque.png"}});
    io::write_text(dir / "index.json", j.dump());
  }
  const auto lib = StickerLibrary::load(dir);
  REQUIRE(lib.stickers.size() == shared_stickers().size());
  CHECK(lib.rejected == std::vector<std::string>{"opaque"});
  for (std::size_t i = 0; i < lib.stickers.size(); ++i) {
    CHECK(lib.stickers[i].name == shared_stickers()[i].name);
    const auto a = lib.stickers[i].rgba.values();
    const auto b = shared_stickers()[i].rgba.values();
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(std::abs(a[k] - b[k]) <= 0.5f / 255.0f + 1e-6f);
  }
  const auto empty = uvtest::temp_dir("stickers_empty");
  CHECK_THROWS_AS(StickerLibrary::load(empty), Error);
  CHECK_THROWS_AS(StickerLibrary::load(empty / "missing"), Error);
}

TEST_CASE("partition splits both sides and is seeded") {
  const auto p = partition(10, 0.25, 4);
  CHECK(std::count(p.begin(), p.end(), true) == 3);
  CHECK(p == partition(10, 0.25, 4));
  const auto q = partition(2, 0.1, 4);
  CHECK(std::count(q.begin(), q.end(), true) == 1);
  const auto none = partition(5, 0.0, 1);
  CHECK(std::count(none.begin(), none.end(), true) == 0);
}

TEST_CASE("synt1 generation is reproducible, split-disjoint and appendable") {
  Synt1Options opt;
  opt.n = 10;
  opt.seed = 17;
  const auto a = uvtest::temp_dir("synt1_a");
  const auto b = uvtest::temp_dir("synt1_b");
  const auto c = uvtest::temp_dir("synt1_c");
  const auto records = generate_synt1(shared_faces(), shared_stickers(), opt, a);
  Synt1Options serial = opt;
  serial.threads = 1;
  generate_synt1(shared_faces(), shared_stickers(), serial, b);
  CHECK(io::read_text(a / "manifest.jsonl") == io::read_text(b / "manifest.jsonl"));
  CHECK(io::read_text(a / "manifest.sha256") == io::read_text(b / "manifest.sha256"));

  Synt1Options half = opt;
  half.n = 4;
  generate_synt1(shared_faces(), shared_stickers(), half, c);
  half.n = 6;
  generate_synt1(shared_faces(), shared_stickers(), half, c);
  CHECK(io::read_text(a / "manifest.jsonl") == io::read_text(c / "manifest.jsonl"));

  REQUIRE_NOTHROW(verify_manifest(a));
  std::set<std::string> faces[2];
  std::set<std::string> stickers[2];
  const UvLayout layout;
  for (const auto& r : records) {
    const int test = r.at("split") == "test" ? 1 : 0;
    faces[test].insert(r.at("face").get<std::string>());
    stickers[test].insert(r.at("sticker").get<std::string>());
    const Plane mask = io::read_png_gray(a / r.at("files").at("mask").get<std::string>());
    double sum = 0.0;
    for (int v = 0; v < 256; ++v)
      for (int u = 0; u < 256; ++u) {
        if (!layout.valid(v, u)) REQUIRE(mask.at(v, u) == 0.0f);
        sum += mask.at(v, u);
      }
    CHECK(sum > 0.0);
  }
  CHECK_FALSE(faces[1].empty());
  for (const auto& f : faces[0]) CHECK(faces[1].count(f) == 0);
  for (const auto& s : stickers[0]) CHECK(stickers[1].count(s) == 0);

  const auto train = load_synt1(a, "train");
  const auto test = load_synt1(a, "test");
  CHECK(train.size() + test.size() == 10);
  CHECK(train.size() == static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) {
          return r.at("split") == "train";
        })));

  const auto first_image = a / records.front().at("files").at("image").get<std::string>();
  io::write_png(first_image, Image(256, 256, 0.1f));
  CHECK_THROWS_AS(verify_manifest(a), Error);
}

TEST_CASE("synt1 rejects empty inputs and mixed dataset kinds") {
  Synt1Options opt;
  opt.n = 1;
  CHECK_THROWS_AS(generate_synt1(FaceSet{}, shared_stickers(), opt, uvtest::temp_dir("s1e")), Error);
  CHECK_THROWS_AS(generate_synt1(shared_faces(), {}, opt, uvtest::temp_dir("s1e")), Error);
  const auto dir = uvtest::temp_dir("s1_kind");
  Synt2Options o2;
  o2.n = 1;
  generate_synt2(shared_faces(), shared_faces(), shared_stickers(),
                 [](const TextureMap& s, const TextureMap&) { return s; }, o2, dir);
  CHECK_THROWS_AS(generate_synt1(shared_faces(), shared_stickers(), opt, dir), Error);
}

TEST_CASE("re-extracted synt1 residuals trace the stored masks") {
  const UvLayout layout;
  const auto faces = make_faces(20, 31);
  const auto stickers = make_sticker_set(16, 3);
  std::vector<double> ious;
  for (int i = 0; i < 48; ++i) {
    const auto s = make_synt1_sample(faces.faces[i % 20], stickers[i % 16], draw_placement(derive_seed(2, i), layout));
    const TextureMap again = uvgeom::extract_texture(s.image, s.position).texture;
    double inter = 0.0;
    double uni = 0.0;
    for (int v = 0; v < 256; ++v)
      for (int u = 0; u < 256; ++u) {
        if (!layout.valid(v, u)) continue;
        double r = 0.0;
        for (int c = 0; c < 3; ++c) r += std::abs(again.at(v, u, c) - s.base_texture.at(v, u, c)) / 3.0;
        const bool a = r > 0.05;
        const bool b = s.mask.at(v, u) > 0.05f;
        inter += a && b;
        uni += a || b;
      }
    ious.push_back(inter / uni);
  }
  std::sort(ious.begin(), ious.end());
  double mean = 0.0;
  for (double v : ious) mean += v / static_cast<double>(ious.size());
  INFO("min " << ious.front() << " median " << ious[ious.size() / 2] << " mean " << mean);
  CHECK(mean >= 0.9);
  CHECK(ious[ious.size() / 2] >= 0.9);
  CHECK(ious.front() >= 0.6);
}

TEST_CASE("synt1 image masks follow the rendered sticker") {
  const auto& face = shared_faces().faces[0];
  const auto s = make_synt1_sample(face, shared_stickers()[1], draw_placement(3, UvLayout()));
  int changed_outside = 0;
  int covered = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      const bool in_mask = s.image_mask.at(y, x) > 0.0f;
      covered += in_mask;
      bool differs = false;
      for (int c = 0; c < 3; ++c) differs |= s.image.at(y, x, c) != face.image.at(y, x, c);
      if (differs && !in_mask) ++changed_outside;
    }
  CHECK(covered > 50);
  // Re-rendering the unmodified texture resamples, so only the sticker changes
  // beyond re-render noise; pixels off the face must be untouched.
  const auto render = uvgeom::render(face.position, s.base_texture, face.image);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      if (s.image_mask.at(y, x) > 0.0f) continue;
      for (int c = 0; c < 3; ++c) REQUIRE(s.image.at(y, x, c) == render.image.at(y, x, c));
    }
}

TEST_CASE("synt2 with an identity color transfer puts the sticker on the source") {
  const auto identity = [](const TextureMap& s, const TextureMap&) { return s; };
  const auto& f = shared_faces().faces;
  const Sticker& st = shared_stickers()[2];
  const PlacementParams p = draw_placement(11, UvLayout());
  const Synt2Triplet t = make_synt2_triplet(f[0], f[1], f[2], st, p, identity);
  const TextureMap ta = uvgeom::extract_texture(f[0].image, f[0].position).texture;
  const Image with_sticker = uvgeom::render(f[0].position, blend_sticker(ta, st, p).texture, f[0].image).image;
  CHECK(t.ground_truth == with_sticker);
  CHECK(t.source == uvgeom::render(f[0].position, ta, f[0].image).image);
  CHECK(t.mask == t.reference_mask);
  CHECK_FALSE(t.reference == t.ground_truth);
}

TEST_CASE("synt2 generation is reproducible") {
  const auto transfer = [](const TextureMap& s, const TextureMap& style) {
    TextureMap out = s;
    for (std::size_t i = 0; i < out.values().size(); ++i)
      out.values()[i] = 0.5f * (s.values()[i] + style.values()[i]);
    return out;
  };
  Synt2Options opt;
  opt.n = 5;
  opt.seed = 8;
  const auto a = uvtest::temp_dir("synt2_a");
  const auto b = uvtest::temp_dir("synt2_b");
  const auto records = generate_synt2(shared_faces(), shared_faces(), shared_stickers(), transfer, opt, a);
  generate_synt2(shared_faces(), shared_faces(), shared_stickers(), transfer, opt, b);
  CHECK(io::read_text(a / "manifest.sha256") == io::read_text(b / "manifest.sha256"));
  REQUIRE_NOTHROW(verify_manifest(a));
  for (const auto& r : records) CHECK(r.at("source_face") != r.at("reference_face"));
  CHECK_THROWS_AS(generate_synt2(shared_faces(), shared_faces(), shared_stickers(), ColorTransferFn{}, opt, a), Error);
}

TEST_CASE("face sets ingest sidecars, resize, and skip small or faceless images") {
  const auto dir = uvtest::temp_dir("faces_ingest");
  make_faces(dir, 2, 4);
  io::write_png(dir / "tiny.png", Image(100, 120, 0.3f));
  io::write_png(dir / "blank.png", Image(300, 300, 0.5f));
  io::write_png(dir / "big.png", Image(ops::resize_bilinear(shared_faces().faces[0].image, 320, 320)));
  const uvgeom::SilhouetteFitProvider provider;
  const FaceSet set = FaceSet::load(dir, provider);
  std::set<std::string> ids;
  for (const auto& f : set.faces) {
    ids.insert(f.id);
    CHECK(f.image.height() == 256);
    CHECK(f.image.width() == 256);
  }
  CHECK(ids == std::set<std::string>{"big", "face0000", "face0001"});
  CHECK(std::set<std::string>(set.skipped.begin(), set.skipped.end()) == std::set<std::string>{"blank", "tiny"});
  const auto sidecar = uvgeom::read_uvpm(dir / "face0001.uvpm");
  for (const auto& f : set.faces)
    if (f.id == "face0001") CHECK(uvgeom::encode_uvpm(f.position) == uvgeom::encode_uvpm(sidecar));
}
