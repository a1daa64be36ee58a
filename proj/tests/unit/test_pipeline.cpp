#include <doctest.h>

#include <fstream>
#include <thread>

#include "test_support.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/pipeline/pipeline.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

using namespace uvmakeup;
using namespace uvmakeup::pipeline;
using fusion::TransferRequest;

namespace {

struct Fixture {
  synth::FaceSet faces;
  Models models;

  Fixture() : faces(synth::make_faces(4, 77, true)) {
    auto store = std::make_shared<uvgeom::PositionMapStore>(std::make_shared<uvgeom::SilhouetteFitProvider>());
    for (const auto& f : faces.faces) store->add(f.image, f.position);
    models.geometry = store;
    color::ColorNetConfig cc;
    cc.seed = 3;
    models.color = std::make_shared<const color::ColorNet>(cc);
    pattern::SegNetConfig sc;
    sc.seed = 4;
    models.pattern = std::make_shared<const pattern::SegNet>(sc);
  }

  const Image& face(int i) const { return faces.faces[i].image; }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TransferRequest plain() {
  TransferRequest r;
  r.use_color = false;
  r.use_pattern = false;
  return r;
}

}  // namespace

TEST_CASE("with both branches off the pipeline re-renders the source texture") {
  const auto& fx = fixture();
  const auto out = transfer(fx.face(0), fx.face(1), plain(), fx.models, true);
  const auto& im = *out.intermediates;
  const auto expected = uvgeom::render(fx.faces.faces[0].position, im.source_texture, fx.face(0));
  CHECK(out.output == expected.image);
  CHECK(im.fused == im.source_texture);
  CHECK(ops::psnr(out.output, fx.face(0), ops::erode(expected.coverage, 8)) >= 30.0);
}

TEST_CASE("an all-zero pattern mask reproduces the color-only texture") {
  const auto& fx = fixture();
  TransferRequest color_only;
  color_only.use_pattern = false;
  const auto a = transfer(fx.face(0), fx.face(1), color_only, fx.models, true);
  const PatternMask zero(256, 256);
  TransferInputs in{&fx.face(0), &fx.face(1), nullptr, &zero, true};
  const auto b = transfer(in, TransferRequest{}, fx.models);
  CHECK(b.intermediates->fused == a.intermediates->fused);
  CHECK_FALSE(b.pattern_detected);
  CHECK(b.metadata.contains("pattern"));
}

TEST_CASE("stored intermediates re-fuse to the stored result") {
  const auto& fx = fixture();
  TransferRequest req;
  req.alpha = 0.7;
  const auto r = transfer(fx.face(2), fx.face(3), req, fx.models, true);
  const auto& im = *r.intermediates;
  CHECK(fusion::fuse(im.pattern_texture, im.color_texture, im.mask) == im.fused);
  CHECK(im.pattern_texture == im.reference_texture);
  for (const char* stage : {"geometry", "extract", "color", "pattern", "fusion", "render", "total"})
    CHECK(r.timings_ms.count(stage) == 1);
}

TEST_CASE("transfer is bit-reproducible and independent across threads") {
  const auto& fx = fixture();
  TransferRequest req;
  req.seed = 11;
  const auto a = transfer(fx.face(0), fx.face(1), req, fx.models, true);
  const auto b = transfer(fx.face(0), fx.face(1), req, fx.models, true);
  CHECK(a.output == b.output);
  CHECK(a.intermediates->mask == b.intermediates->mask);
  CHECK(a.intermediates->fused == b.intermediates->fused);

  std::vector<Image> outs(3);
  std::vector<std::thread> workers;
  for (int i = 0; i < 3; ++i)
    workers.emplace_back([&, i] { outs[i] = transfer(fx.face(i), fx.face(3), req, fx.models).output; });
  for (auto& w : workers) w.join();
  for (int i = 0; i < 3; ++i) CHECK(outs[i] == transfer(fx.face(i), fx.face(3), req, fx.models).output);
}

TEST_CASE("disabling one branch leaves the other branch's output unchanged") {
  const auto& fx = fixture();
  TransferRequest both;
  TransferRequest no_pattern;
  no_pattern.use_pattern = false;
  TransferRequest no_color;
  no_color.use_color = false;
  const auto full = transfer(fx.face(0), fx.face(2), both, fx.models, true);
  CHECK(transfer(fx.face(0), fx.face(2), no_pattern, fx.models, true).intermediates->color_texture ==
        full.intermediates->color_texture);
  CHECK(transfer(fx.face(0), fx.face(2), no_color, fx.models, true).intermediates->mask == full.intermediates->mask);
}

TEST_CASE("alpha and region selection shape the color texture") {
  const auto& fx = fixture();
  TransferRequest req;
  req.use_pattern = false;
  req.alpha = 0.0;
  const auto zero = transfer(fx.face(0), fx.face(1), req, fx.models, true);
  CHECK(zero.intermediates->color_texture == zero.intermediates->source_texture);

  req.alpha = 1.0;
  const auto full = transfer(fx.face(0), fx.face(1), req, fx.models, true);
  const auto& im = *full.intermediates;
  CHECK(im.color_texture == color::swap(*fx.models.color, im.source_texture, im.reference_texture).first);

  req.partial = true;
  req.regions = {uvgeom::Region::lips};
  const auto lips = transfer(fx.face(0), fx.face(1), req, fx.models, true);
  const auto masks = uvgeom::universal_region_masks();
  for (int v = 0; v < 256; ++v)
    for (int u = 0; u < 256; ++u)
      if (masks.lips.at(v, u) == 0.0f)
        for (int c = 0; c < 3; ++c)
          REQUIRE(lips.intermediates->color_texture.at(v, u, c) == im.source_texture.at(v, u, c));
}

TEST_CASE("two references interpolate and pick the named pattern source") {
  const auto& fx = fixture();
  TransferRequest req;
  req.alpha = 1.0;
  req.pattern_source = fusion::PatternSource::second;
  TransferInputs in{&fx.face(0), &fx.face(1), &fx.face(2), nullptr, true};
  const auto r = transfer(in, req, fx.models);
  const auto& im = *r.intermediates;
  REQUIRE(im.reference2_texture.has_value());
  CHECK(im.pattern_texture == *im.reference2_texture);
  CHECK(im.color_texture == color::swap(*fx.models.color, im.source_texture, im.reference_texture).first);
  req.alpha = 0.0;
  const auto r0 = transfer(in, req, fx.models);
  CHECK(r0.intermediates->color_texture ==
        color::swap(*fx.models.color, im.source_texture, *im.reference2_texture).first);
  TransferInputs single{&fx.face(0), &fx.face(1), nullptr, nullptr, false};
  CHECK_THROWS_AS(transfer(single, req, fx.models), Error);
}

TEST_CASE("missing models and failed geometry raise typed errors") {
  const auto& fx = fixture();
  Models bare;
  bare.geometry = fx.models.geometry;
  try {
    transfer(fx.face(0), fx.face(1), TransferRequest{}, bare);
    FAIL("expected model_missing");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::model_missing);
  }
  CHECK_NOTHROW(transfer(fx.face(0), fx.face(1), plain(), bare));
  const Image blank(256, 256, 0.5f);
  try {
    transfer(fx.face(0), blank, plain(), fx.models);
    FAIL("expected geometry_failure");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::geometry_failure);
    CHECK(e.detail() == "reference");
  }
  TransferRequest bad;
  bad.alpha = 2.0;
  CHECK_THROWS_AS(transfer(fx.face(0), fx.face(1), bad, fx.models), Error);
}

TEST_CASE("models round trip and reject damaged or mismatched files") {
  const auto& fx = fixture();
  const auto dir = uvtest::temp_dir("models");
  save_models(fx.models, dir);
  const Models back = load_models(dir, fx.models.geometry);
  CHECK(model_checksums(back) == model_checksums(fx.models));
  CHECK(model_checksums(back).size() == 2);

  const auto swapped = uvtest::temp_dir("models_swapped");
  save_models(fx.models, swapped);
  std::filesystem::copy_file(dir / "pattern.uvmc", swapped / "color.uvmc",
                             std::filesystem::copy_options::overwrite_existing);
  try {
    load_models(swapped);
    FAIL("expected checkpoint error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::checkpoint);
  }

  const auto truncated = uvtest::temp_dir("models_truncated");
  save_models(fx.models, truncated);
  auto bytes = io::read_file(truncated / "pattern.uvmc");
  bytes.resize(bytes.size() / 2);
  io::write_file(truncated / "pattern.uvmc", bytes);
  CHECK_THROWS_AS(load_models(truncated), Error);

  const auto version = uvtest::temp_dir("models_version");
  save_models(fx.models, version);
  io::write_text(version / "models.json", R"({"format": 99, "color": "color.uvmc"})");
  CHECK_THROWS_AS(load_models(version), Error);
  CHECK_THROWS_AS(load_models(uvtest::temp_dir("models_none")), Error);
}

TEST_CASE("intermediates dump to disk") {
  const auto& fx = fixture();
  const auto r = transfer(fx.face(0), fx.face(1), TransferRequest{}, fx.models, true);
  const auto dir = uvtest::temp_dir("dump");
  dump_intermediates(*r.intermediates, dir);
  for (const char* f : {"source_texture.png", "reference_texture.png", "color_texture.png", "mask.png",
                        "fused_texture.png", "source_position.uvpm"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(uvgeom::read_uvpm(dir / "source_position.uvpm") == r.intermediates->source_position);
}

TEST_CASE("evaluation reports on generated datasets") {
  const auto& fx = fixture();
  const auto stickers = synth::make_sticker_set(4, 2, 64);
  const auto s1 = uvtest::temp_dir("eval_s1");
  synth::Synt1Options o1;
  o1.n = 6;
  synth::generate_synt1(fx.faces, stickers, o1, s1);
  const auto seg = evaluate_segmentation(*fx.models.pattern, s1, "test");
  CHECK_FALSE(seg.samples().empty());
  for (const auto& s : seg.samples()) {
    CHECK(s.values.at("miou") >= 0.0);
    CHECK(s.values.at("miou") <= 1.0);
  }

  const auto s2 = uvtest::temp_dir("eval_s2");
  synth::Synt2Options o2;
  o2.n = 2;
  synth::generate_synt2(fx.faces, fx.faces, stickers, synth::color_net_transfer(*fx.models.color), o2, s2);
  TransferEvalOptions opt;
  opt.ground_truth_mask = true;
  const metrics::ProjectionEmbedder emb;
  opt.embedder = &emb;
  const auto rep = evaluate_transfer(fx.models, s2, opt);
  REQUIRE(rep.samples().size() == 2);
  for (const auto& s : rep.samples()) {
    CHECK(s.values.at("ms_ssim") > 0.5);
    CHECK(s.values.count("identity") == 1);
  }
  const auto path = uvtest::temp_dir("eval_report") / "r.json";
  rep.write(path);
  CHECK(metrics::EvalReport::read(path).samples().size() == 2);
}

TEST_CASE("a prepared reference gives the same result as preparing on the fly") {
  const auto& fx = fixture();
  const PreparedReference ref = prepare_reference(fx.face(1), fx.models);
  CHECK_FALSE(ref.mask.empty());
  CHECK(ref.mask == pattern::predict_mask(*fx.models.pattern, ref.texture));
  TransferRequest req;
  req.alpha = 0.4;
  const auto a = transfer_prepared(fx.face(0), ref, nullptr, nullptr, req, fx.models);
  const auto b = transfer(fx.face(0), fx.face(1), req, fx.models);
  CHECK(a.output == b.output);
  Models no_seg = fx.models;
  no_seg.pattern.reset();
  CHECK(transfer_prepared(fx.face(0), ref, nullptr, nullptr, req, no_seg).output == b.output);
}
