// Acceptance run: one PASS/FAIL line per criterion on stdout, exit status 1
// when any criterion fails. Progress goes to stderr.
//
//   uvmakeup_acceptance [--work DIR] [--only name,name,...] [--list]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "test_support.hpp"
#include "uvmakeup/color/histogram.hpp"
#include "uvmakeup/color/losses.hpp"
#include "uvmakeup/color/train.hpp"
#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/fusion/fusion.hpp"
#include "uvmakeup/pattern/dice.hpp"
#include "uvmakeup/pattern/train.hpp"
#include "uvmakeup/pipeline/pipeline.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/synth/face_synth.hpp"
#include "uvmakeup/uvgeom/face_model.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

namespace fs = std::filesystem;
using namespace uvmakeup;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// State shared between criteria that build on each other's training runs.
struct Shared {
  fs::path work;
  std::shared_ptr<const color::ColorNet> color;
  std::shared_ptr<const pattern::SegNet> seg;
};

// ---------------------------------------------------------------------------
// Histogram matching against a sort-and-assign oracle.

// Independent of the matcher's cumulative-count tables: masked texels are
// sorted per channel, the k-th smallest source value takes the k-th smallest
// reference value, and every member of a run of equal source values takes
// the value assigned to the top rank of that run.
TextureMap sort_and_assign(const TextureMap& src, const TextureMap& ref, const SoftMask& mask) {
  TextureMap out = src;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i)
    if (mask.values()[i] > 0.5f) idx.push_back(i);
  if (idx.empty()) return out;
  auto level = [](float v) { return static_cast<int>(std::floor(std::clamp(double(v), 0.0, 1.0) * 255.0 + 0.5)); };
  for (int c = 0; c < 3; ++c) {
    std::vector<std::pair<int, std::size_t>> s;
    std::vector<int> r;
    for (std::size_t i : idx) {
      s.emplace_back(level(src.values()[i * 3 + c]), i);
      r.push_back(level(ref.values()[i * 3 + c]));
    }
    std::sort(s.begin(), s.end());
    std::sort(r.begin(), r.end());
    std::size_t k = 0;
    while (k < s.size()) {
      std::size_t top = k;
      while (top + 1 < s.size() && s[top + 1].first == s[k].first) ++top;
      for (std::size_t j = k; j <= top; ++j) out.values()[s[j].second * 3 + c] = static_cast<float>(r[top]) / 255.0f;
      k = top + 1;
    }
  }
  return out;
}

Outcome hm_oracle(Shared&) {
  Stopwatch sw;
  constexpr int kInstances = 200;
  double worst = 0.0;
  int failures = 0;
  for (int t = 0; t < kInstances; ++t) {
    Rng rng = make_rng(2024, t);
    TextureMap src(8, 8);
    TextureMap ref(8, 8);
    SoftMask mask(8, 8);
    // Every other instance draws from a handful of levels so that ties are common.
    const bool few_levels = t % 2 == 1;
    auto draw = [&] {
      return few_levels ? static_cast<float>(uniform_int(rng, 0, 5) * 51) / 255.0f
                        : static_cast<float>(uniform(rng, 0.0, 1.0));
    };
    for (float& v : src.values()) v = draw();
    for (float& v : ref.values()) v = draw();
    for (float& v : mask.values()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
    const auto got = color::histogram_match(src, ref, mask).texture;
    const auto want = sort_and_assign(src, ref, mask);
    double dev = 0.0;
    for (std::size_t i = 0; i < got.values().size(); ++i)
      dev = std::max(dev, std::abs(double(got.values()[i]) - double(want.values()[i])));
    worst = std::max(worst, dev);
    failures += dev > 1.0 / 255.0 + 1e-7;
  }
  const double secs = sw.seconds();
  return {failures == 0 && secs < 10.0, std::to_string(kInstances) + " instances, " + std::to_string(failures) +
                                            " outside 1/255, max deviation " + fmt_double(worst * 255.0, 3) +
                                            "/255, " + fmt_double(secs, 2) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------------------
// Fusion and interpolation algebra.

// Textures on the 1/256 grid and weights on the 1/16 grid keep every product
// and sum exactly representable, so the identities can be checked bitwise.
TextureMap dyadic_texture(Rng& rng, int size) {
  TextureMap t(size, size);
  for (float& v : t.values()) v = static_cast<float>(uniform_int(rng, 0, 256)) / 256.0f;
  return t;
}

Outcome fusion_algebra(Shared&) {
  constexpr int kTrials = 1000;
  constexpr int kSize = 32;
  const uvgeom::UvLayout layout(kSize);
  const auto masks = layout.region_masks();
  int violations = 0;
  std::string first;
  auto expect = [&](bool ok, const std::string& what, int trial) {
    if (ok) return;
    if (violations++ == 0) first = what + " (trial " + std::to_string(trial) + ")";
  };
  auto same = [](const Raster<3>& a, const Raster<3>& b) { return a == b; };
  for (int t = 0; t < kTrials; ++t) {
    Rng rng = make_rng(7, t);
    const TextureMap a = dyadic_texture(rng, kSize);
    const TextureMap b = dyadic_texture(rng, kSize);
    const TextureMap c = dyadic_texture(rng, kSize);
    PatternMask m(kSize, kSize);
    for (float& v : m.values()) v = static_cast<float>(uniform_int(rng, 0, 16)) / 16.0f;

    expect(same(fusion::fuse(a, b, PatternMask(kSize, kSize, 0.0f)), b), "fuse(mask 0) != color texture", t);
    expect(same(fusion::fuse(a, b, PatternMask(kSize, kSize, 1.0f)), a), "fuse(mask 1) != reference texture", t);
    const TextureMap f = fusion::fuse(a, b, m);
    bool fuse_lerp = true;
    for (std::size_t i = 0; i < f.values().size(); ++i) {
      const float w = m.values()[i / 3];
      fuse_lerp &= f.values()[i] == w * a.values()[i] + (1.0f - w) * b.values()[i];
    }
    expect(fuse_lerp, "fuse != mask * ref + (1 - mask) * color", t);

    expect(same(fusion::interpolate(a, b, 0.0), b), "interpolate(alpha 0) != second", t);
    expect(same(fusion::interpolate(a, b, 1.0), a), "interpolate(alpha 1) != first", t);
    const double a1 = uniform_int(rng, 0, 16) / 16.0;
    const double a2 = uniform_int(rng, 0, 16) / 16.0;
    const double lam = uniform_int(rng, 0, 16) / 16.0;
    // interpolate(a, b, lam*a1 + (1-lam)*a2) == lam*interpolate(a1) + (1-lam)*interpolate(a2)
    const TextureMap l1 = fusion::interpolate(a, b, a1);
    const TextureMap l2 = fusion::interpolate(a, b, a2);
    const TextureMap mix = fusion::interpolate(a, b, lam * a1 + (1.0 - lam) * a2);
    bool affine = true;
    for (std::size_t i = 0; i < mix.values().size(); ++i)
      affine &= double(mix.values()[i]) == lam * l1.values()[i] + (1.0 - lam) * l2.values()[i];
    expect(affine, "interpolation is not affine in alpha", t);

    using fusion::RegionSelection;
    using uvgeom::Region;
    const Plane* valid = &layout.valid_plane();
    const TextureMap lips = fusion::partial_apply(c, a, masks, RegionSelection{{Region::lips}, false});
    bool outside_kept = true;
    for (std::size_t i = 0; i < lips.values().size(); ++i)
      if (masks.lips.values()[i / 3] == 0.0f) outside_kept &= lips.values()[i] == c.values()[i];
    expect(outside_kept, "lips-only transfer changed texels outside the lips", t);
    const TextureMap full = fusion::partial_apply(c, a, masks, RegionSelection{{}, true}, valid);
    bool full_ok = true;
    for (int v = 0; v < kSize; ++v)
      for (int u = 0; u < kSize; ++u)
        for (int ch = 0; ch < 3; ++ch)
          full_ok &= full.at(v, u, ch) == (layout.valid(v, u) ? a.at(v, u, ch) : c.at(v, u, ch));
    expect(full_ok, "full-face selection != full transfer on the valid region", t);
    // Disjoint regions compose in either order and equal the joint selection.
    const TextureMap lips_then_eyes = fusion::partial_apply(
        fusion::partial_apply(c, a, masks, RegionSelection{{Region::lips}, false}), a, masks,
        RegionSelection{{Region::eyes}, false});
    const TextureMap eyes_then_lips = fusion::partial_apply(
        fusion::partial_apply(c, a, masks, RegionSelection{{Region::eyes}, false}), a, masks,
        RegionSelection{{Region::lips}, false});
    const TextureMap joint = fusion::partial_apply(c, a, masks, RegionSelection{{Region::lips, Region::eyes}, false});
    expect(same(lips_then_eyes, joint) && same(eyes_then_lips, joint), "disjoint partial transfers do not compose",
           t);
  }
  return {violations == 0, std::to_string(kTrials) + " trials, " + std::to_string(violations) + " violations" +
                               (first.empty() ? "" : ", first: " + first)};
}

// ---------------------------------------------------------------------------
// Gradient checks.

Outcome gradchecks(Shared&) {
  Stopwatch sw;
  std::vector<std::pair<std::string, uvtest::GradCheck>> results;
  {
    const auto gt = uvtest::random_tensor({2, 1, 8, 8}, 3, 0.0, 1.0);
    const auto pr = uvtest::random_tensor({2, 1, 8, 8}, 4, 0.0, 1.0);
    results.emplace_back("dice", uvtest::gradcheck([&](const auto& v) { return pattern::dice_loss(v[0], gt); }, {pr}));
  }
  {
    const uvgeom::RegionMaskSet regions{SoftMask(uvtest::random_raster<1>(8, 8, 1)),
                                        SoftMask(uvtest::random_raster<1>(8, 8, 2)),
                                        SoftMask(uvtest::random_raster<1>(8, 8, 3))};
    const TextureMap src = uvtest::random_texture(8, 8, 4);
    const TextureMap ref = uvtest::random_texture(8, 8, 5);
    const auto targets = color::hist_targets<double>(src, ref, regions, color::LossWeights{});
    const auto out = uvtest::random_tensor({1, 3, 8, 8}, 6, 0.0, 1.0);
    const auto orig = uvtest::random_tensor({1, 3, 8, 8}, 7, 0.0, 1.0);
    const color::ConvFeatureStack<double> features(9);
    results.emplace_back("hist",
                         uvtest::gradcheck([&](const auto& v) { return color::hist_loss(v[0], targets); }, {out}));
    results.emplace_back("cyc", uvtest::gradcheck([&](const auto& v) { return color::cyc_loss(v[0], orig); }, {out}));
    results.emplace_back(
        "per", uvtest::gradcheck([&](const auto& v) { return color::per_loss(features, orig, v[0]); }, {out}));
  }
  const double secs = sw.seconds();
  bool ok = secs < 60.0;
  std::string detail;
  for (const auto& [name, g] : results) {
    ok &= g.failures == 0 && g.checked > 0;
    char rel[32];
    std::snprintf(rel, sizeof(rel), "%.2e", g.max_rel_error);
    detail += name + " max rel " + rel + " (" + std::to_string(g.failures) + "/" +
              std::to_string(g.checked) + " off), ";
  }
  return {ok, detail + fmt_double(secs, 2) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------------------
// UV round trip and pose invariance.

synth::RenderedSubject subject_at(std::uint64_t id, const uvgeom::HeadPose& pose, const uvgeom::ParametricFace& face) {
  synth::SubjectParams p = synth::random_subject(id, 31);
  p.pose = pose;
  return synth::render_subject(p, synth::face_texture(p, face.layout()), face);
}

Outcome uv_round_trip(Shared&) {
  const uvgeom::ParametricFace face;
  double worst_psnr = 1e9;
  for (std::uint64_t id = 0; id < 4; ++id) {
    const uvgeom::HeadPose pose{-15.0 + 10.0 * id, 5.0 - 3.0 * id, 79.0, 127.0, 128.0};
    const auto s = subject_at(id, pose, face);
    const auto ex = uvgeom::extract_texture(s.image, s.position);
    const auto back = uvgeom::render(s.position, ex.texture, s.image);
    worst_psnr = std::min(worst_psnr, ops::psnr(back.image, s.image, ops::erode(back.coverage, 8)));
  }
  double worst_mad = 0.0;
  for (std::uint64_t id = 0; id < 4; ++id) {
    const auto a = subject_at(10 + id, uvgeom::HeadPose{-14.0, -4.0, 78.0, 127.5, 127.5}, face);
    const auto b = subject_at(10 + id, uvgeom::HeadPose{16.0, 6.0, 80.0, 125.0, 130.0}, face);
    const auto ta = uvgeom::extract_texture(a.image, a.position);
    const auto tb = uvgeom::extract_texture(b.image, b.position);
    double sum = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < ta.texture.height(); ++v)
      for (int u = 0; u < ta.texture.width(); ++u) {
        if (ta.visibility.at(v, u) < 0.5f || tb.visibility.at(v, u) < 0.5f) continue;
        for (int c = 0; c < 3; ++c) sum += std::abs(ta.texture.at(v, u, c) - tb.texture.at(v, u, c));
        n += 3;
      }
    worst_mad = std::max(worst_mad, n ? sum / double(n) : 1.0);
  }
  return {worst_psnr >= 30.0 && worst_mad <= 0.05, "min interior PSNR " + fmt_double(worst_psnr, 2) +
                                                      " dB (>= 30), max rotation MAD " + fmt_double(worst_mad) +
                                                      " (<= 0.05) over 4 subjects"};
}

// ---------------------------------------------------------------------------
// Color branch smoke training.

color::ColorDataset color_toy_set(int n_textures, std::uint64_t seed) {
  const uvgeom::UvLayout layout;
  color::ColorDataset d;
  // Half bare, half made up, drawn from distinct subjects.
  for (int i = 0; i < n_textures / 2; ++i) {
    d.bare.push_back(synth::face_texture(synth::random_subject(2 * i, seed), layout));
    const auto other = synth::face_texture(synth::random_subject(2 * i + 1, seed), layout);
    d.makeup.push_back(synth::apply_makeup(other, synth::random_style(i, seed), layout));
  }
  return d;
}

bool valid_texture(const TextureMap& t, int size) {
  if (t.height() != size || t.width() != size) return false;
  return std::all_of(t.values().begin(), t.values().end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

Outcome color_smoke(Shared& shared) {
  Stopwatch sw;
  const auto data = color_toy_set(50, 5);
  int decreased = 0;
  bool outputs_valid = true;
  std::string losses;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    color::ColorTrainConfig cfg;
    cfg.epochs = 1;
    cfg.iters_per_epoch = 200;
    cfg.seed = seed;
    cfg.net.seed = seed;
    auto res = color::train_color(data, cfg);
    const double first = res.log.front().generator.total;
    const double last = res.log.back().generator.total;
    decreased += last < first;
    losses += (losses.empty() ? "" : ", ") + fmt_double(first, 2) + " -> " + fmt_double(last, 2);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto [s2m, m2s] = color::swap(res.net, data.bare[i], data.makeup[i]);
      outputs_valid &= valid_texture(s2m, 256) && valid_texture(m2s, 256);
    }
    spdlog::info("color seed {}: {:.3f} -> {:.3f} ({:.0f} s)", seed, first, last, sw.seconds());
    if (seed == 1) shared.color = std::make_shared<const color::ColorNet>(std::move(res.net));
  }
  return {decreased >= 4 && outputs_valid, "loss decreased in " + std::to_string(decreased) + "/5 seeds (" + losses +
                                               "), outputs " + (outputs_valid ? "valid" : "INVALID") + ", " +
                                               fmt_double(sw.seconds(), 0) + " s"};
}

std::shared_ptr<const color::ColorNet> ensure_color(Shared& shared) {
  if (!shared.color) {
    color::ColorTrainConfig cfg;
    cfg.iters_per_epoch = 200;
    cfg.seed = 1;
    cfg.net.seed = 1;
    shared.color = std::make_shared<const color::ColorNet>(color::train_color(color_toy_set(50, 5), cfg).net);
  }
  return shared.color;
}

// ---------------------------------------------------------------------------
// Ground-truth-mask transfer bound on synt2.

Outcome synt2_gt_mask(Shared& shared) {
  Stopwatch sw;
  const auto net = ensure_color(shared);
  const fs::path root = shared.work / "synt2";
  fs::remove_all(root);
  const auto faces = synth::make_faces(24, 41);
  const auto styles = synth::make_faces(8, 42, true);
  const auto stickers = synth::make_sticker_set(16, 43);
  synth::Synt2Options o;
  o.n = 50;
  o.seed = 44;
  synth::generate_synt2(faces, styles, stickers, synth::color_net_transfer(*net), o, root);
  pipeline::Models models;
  models.geometry = std::make_shared<const uvgeom::SilhouetteFitProvider>();
  models.color = net;
  pipeline::TransferEvalOptions opt;
  opt.ground_truth_mask = true;
  const auto report = pipeline::evaluate_transfer(models, root, opt);
  report.write(shared.work / "synt2_gt_mask.json");
  const auto s = report.summary().at("ms_ssim");
  double lo = 1.0;
  for (const auto& r : report.samples()) lo = std::min(lo, r.values.at("ms_ssim"));
  return {s.count == 50 && s.mean >= 0.95, std::to_string(s.count) + " triplets (" + std::to_string(s.excluded) +
                                               " excluded), mean MS-SSIM " + fmt_double(s.mean) + " (>= 0.95), min " +
                                               fmt_double(lo) + ", " + fmt_double(sw.seconds(), 0) + " s"};
}

// ---------------------------------------------------------------------------
// Scaled segmentation training.

Outcome segmentation(Shared& shared) {
  Stopwatch sw;
  const fs::path root = shared.work / "synt1";
  fs::remove_all(root);
  const auto faces = synth::make_faces(40, 11);
  const auto stickers = synth::make_sticker_set(32, 12);
  synth::Synt1Options o;
  o.n = 200;
  o.seed = 13;
  synth::generate_synt1(faces, stickers, o, root);
  const auto train = synth::load_synt1(root, "train");
  pattern::PatternTrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 14;
  cfg.net.seed = 15;
  auto res = pattern::train_pattern(train, cfg);
  const auto report = pipeline::evaluate_segmentation(res.net, root, "test");
  report.write(shared.work / "segmentation.json");
  shared.seg = std::make_shared<const pattern::SegNet>(std::move(res.net));
  const double miou = report.summary().at("miou").mean;
  const double secs = sw.seconds();
  return {miou >= 0.6 && secs <= 1800.0,
          std::to_string(train.size()) + " train / " + std::to_string(report.samples().size()) +
              " held-out samples, 30 epochs, final loss " + fmt_double(res.log.back().loss) + ", mIoU " +
              fmt_double(miou) + " (>= 0.6), " + fmt_double(secs, 0) + " s (limit 1800 s)"};
}

// ---------------------------------------------------------------------------
// Determinism.

Outcome determinism(Shared& shared) {
  pipeline::Models models;
  models.geometry = std::make_shared<const uvgeom::SilhouetteFitProvider>();
  models.color = shared.color ? shared.color : std::make_shared<const color::ColorNet>(color::ColorNetConfig{});
  if (shared.seg) {
    models.pattern = shared.seg;
  } else {
    pattern::SegNetConfig cfg;
    cfg.seed = 5;
    models.pattern = std::make_shared<const pattern::SegNet>(cfg);
  }
  const auto people = synth::make_faces(2, 61);
  const auto styled = synth::make_faces(2, 62, true);
  fusion::TransferRequest req;
  req.seed = 9;
  const auto a = pipeline::transfer(people.faces[0].image, styled.faces[1].image, req, models);
  const auto b = pipeline::transfer(people.faces[0].image, styled.faces[1].image, req, models);
  // Reload the models from disk and repeat.
  const fs::path dir = shared.work / "models";
  fs::remove_all(dir);
  pipeline::save_models(models, dir);
  const auto reloaded = pipeline::load_models(dir);
  const auto c = pipeline::transfer(people.faces[0].image, styled.faces[1].image, req, reloaded);
  const bool transfer_ok = static_cast<const RgbRaster&>(a.output) == static_cast<const RgbRaster&>(b.output) &&
                           static_cast<const RgbRaster&>(a.output) == static_cast<const RgbRaster&>(c.output);

  const auto digest = [](const fs::path& root) { return io::read_text(root / "manifest.sha256"); };
  const auto stickers = synth::make_sticker_set(8, 63);
  std::vector<std::string> s1, s2;
  for (int run = 0; run < 2; ++run) {
    const fs::path r1 = shared.work / ("det_synt1_" + std::to_string(run));
    const fs::path r2 = shared.work / ("det_synt2_" + std::to_string(run));
    fs::remove_all(r1);
    fs::remove_all(r2);
    const auto faces = synth::make_faces(6, 64);
    const auto styles = synth::make_faces(3, 65, true);
    synth::Synt1Options o1;
    o1.n = 8;
    o1.seed = 66;
    synth::generate_synt1(faces, stickers, o1, r1);
    synth::Synt2Options o2;
    o2.n = 4;
    o2.seed = 67;
    synth::generate_synt2(faces, styles, stickers, synth::color_net_transfer(*models.color), o2, r2);
    synth::verify_manifest(r1);
    synth::verify_manifest(r2);
    s1.push_back(digest(r1));
    s2.push_back(digest(r2));
  }
  const bool data_ok = s1[0] == s1[1] && s2[0] == s2[1];
  return {transfer_ok && data_ok, std::string("transfer ") + (transfer_ok ? "bit-identical" : "DIFFERS") +
                                      " across repeats and a model reload; synt1/synt2 manifest digests " +
                                      (data_ok ? "reproduced" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "uvmakeup_acceptance";
  std::set<std::string> only;
  bool list = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string name; std::getline(ss, name, ',');) only.insert(name);
    } else if (arg == "--list") {
      list = true;
    } else {
      std::cerr << "usage: " << argv[0] << " [--work DIR] [--only name,...] [--list]\n";
      return 2;
    }
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("acceptance"));
  spdlog::set_pattern("[%H:%M:%S] %v");

  const std::vector<std::pair<std::string, std::function<Outcome(Shared&)>>> criteria = {
      {"hm_oracle", hm_oracle},
      {"fusion_algebra", fusion_algebra},
      {"gradient_checks", gradchecks},
      {"uv_round_trip", uv_round_trip},
      {"color_smoke_training", color_smoke},
      {"synt2_gt_mask_ms_ssim", synt2_gt_mask},
      {"segmentation_miou", segmentation},
      {"determinism", determinism},
  };
  if (list) {
    for (const auto& c : criteria) std::cout << c.first << "\n";
    return 0;
  }
  fs::create_directories(work);
  Shared shared{work, nullptr, nullptr};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    Stopwatch sw;
    try {
      o = fn(shared);
    } catch (const Error& e) {
      o = {false, std::string("error ") + std::string(category_name(e.category())) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    spdlog::info("{} finished in {:.1f} s", name, sw.seconds());
  }
  return failed == 0 ? 0 : 1;
}
