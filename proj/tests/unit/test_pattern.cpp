#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"
#include "uvmakeup/nn/convert.hpp"
#include "uvmakeup/pattern/dice.hpp"
#include "uvmakeup/pattern/seg_net.hpp"
#include "uvmakeup/pattern/train.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

using namespace uvmakeup;
using namespace uvmakeup::pattern;

namespace {

PatternMask box(int h, int w, int y0, int y1, int x0, int x1) {
  PatternMask m(h, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(y, x) = 1.0f;
  return m;
}

SegNetConfig small_net(std::uint64_t seed) {
  SegNetConfig c;
  c.uv_size = 64;
  c.widths = {4, 8, 16};
  c.seed = seed;
  return c;
}

PatternDataset blob_dataset(int n, int size, std::uint64_t seed, bool empty_masks = false) {
  PatternDataset d;
  Rng rng = make_rng(seed, 0);
  for (int i = 0; i < n; ++i) {
    TextureMap t(uvtest::random_raster<3>(size, size, seed * 1000 + i, 0.4, 0.6));
    PatternMask m(size, size);
    const double cy = uniform(rng, 0.3, 0.7) * size;
    const double cx = uniform(rng, 0.3, 0.7) * size;
    const double r = uniform(rng, 0.08, 0.15) * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) > r * r) continue;
        t.at(y, x, 0) = 0.1f;
        t.at(y, x, 1) = 0.2f;
        t.at(y, x, 2) = 0.9f;
        if (!empty_masks) m.at(y, x) = 1.0f;
      }
    d.textures.push_back(t);
    d.masks.push_back(contain(m));
  }
  return d;
}

}  // namespace

TEST_CASE("dice coefficient worked examples") {
  const PatternMask a = box(20, 20, 0, 10, 0, 10);
  CHECK(dice_coefficient(a, a) == 1.0);
  const PatternMask far = box(20, 20, 10, 20, 10, 20);
  CHECK(dice_coefficient(a, far) == doctest::Approx(1.0 / 201.0));
  const PatternMask half = box(20, 20, 5, 15, 0, 10);
  CHECK(dice_coefficient(a, half, 0.0) == 0.5);
  CHECK(dice_coefficient(a, half) == doctest::Approx(101.0 / 201.0));
  CHECK(dice_coefficient(PatternMask(4, 4), PatternMask(4, 4)) == 1.0);
}

TEST_CASE("dice coefficient is symmetric and bounded") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const PatternMask a(uvtest::random_raster<1>(16, 16, 2 * s));
    const PatternMask b(uvtest::random_raster<1>(16, 16, 2 * s + 1));
    const double ab = dice_coefficient(a, b);
    CHECK(ab == dice_coefficient(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("dice loss matches the coefficient and its gradient matches finite differences") {
  const nn::Tensor<double> gt = uvtest::random_tensor({2, 1, 8, 8}, 3, 0.0, 1.0);
  const nn::Tensor<double> pr = uvtest::random_tensor({2, 1, 8, 8}, 4, 0.0, 1.0);
  const double loss = dice_loss(nn::Var<double>(pr), gt).item();
  double expect = 0.0;
  for (int n = 0; n < 2; ++n) {
    expect += 1.0 - dice_coefficient(nn::to_raster<1>(gt, n), nn::to_raster<1>(pr, n));
  }
  CHECK(loss == doctest::Approx(expect / 2.0).epsilon(1e-6));
  const auto g = uvtest::gradcheck([&](const auto& v) { return dice_loss(v[0], gt); }, {pr});
  INFO("max rel error " << g.max_rel_error);
  CHECK(g.failures == 0);
}

TEST_CASE("binarize thresholds strictly above one half") {
  PatternMask m(1, 3);
  m.at(0, 0) = 0.5f;
  m.at(0, 1) = 0.5001f;
  m.at(0, 2) = 0.2f;
  const PatternMask b = binarize(m);
  CHECK(b.at(0, 0) == 0.0f);
  CHECK(b.at(0, 1) == 1.0f);
  CHECK(b.at(0, 2) == 0.0f);
}

TEST_CASE("predicted masks have the texture's size and lie in (0,1)") {
  SegNetConfig cfg;
  cfg.seed = 2;
  const SegNet net(cfg);
  const TextureMap tex = uvtest::random_texture(256, 256, 5);
  const PatternMask raw = predict_mask_raw(net, tex);
  CHECK(raw.height() == 256);
  CHECK(raw.width() == 256);
  for (float v : raw.values()) {
    REQUIRE(v > 0.0f);
    REQUIRE(v < 1.0f);
  }
  const PatternMask contained = predict_mask(net, tex);
  const uvgeom::UvLayout layout(256);
  for (int v = 0; v < 256; ++v)
    for (int u = 0; u < 256; ++u) {
      if (layout.valid(v, u)) REQUIRE(contained.at(v, u) == raw.at(v, u));
      else REQUIRE(contained.at(v, u) == 0.0f);
    }
  CHECK(contain(contained) == contained);
}

TEST_CASE("prediction is deterministic for a fixed seed and input") {
  const TextureMap tex = uvtest::random_texture(64, 64, 6);
  CHECK(predict_mask(SegNet(small_net(4)), tex) == predict_mask(SegNet(small_net(4)), tex));
  CHECK_FALSE(predict_mask(SegNet(small_net(4)), tex) == predict_mask(SegNet(small_net(5)), tex));
}

TEST_CASE("prediction errors") {
  try {
    predict_mask(SegNet(), TextureMap(64, 64));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::model_missing);
  }
  CHECK_THROWS_AS(predict_mask(SegNet(small_net(1)), TextureMap(32, 32)), Error);
  SegNetConfig bad = small_net(1);
  bad.uv_size = 60;
  CHECK_THROWS_AS(SegNet{bad}, Error);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(3, 0, 37);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(37);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);
  CHECK(a == epoch_order(3, 0, 37));
  CHECK(a != epoch_order(3, 1, 37));
  CHECK(a != epoch_order(4, 0, 37));
}

TEST_CASE("training rejects bad datasets") {
  PatternTrainConfig cfg;
  cfg.net = small_net(1);
  cfg.epochs = 1;
  try {
    train_pattern(PatternDataset{}, cfg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::empty_dataset);
  }
  PatternDataset d = blob_dataset(2, 64, 1);
  d.masks.pop_back();
  CHECK_THROWS_AS(train_pattern(d, cfg), Error);
  d = blob_dataset(2, 32, 1);
  CHECK_THROWS_AS(train_pattern(d, cfg), Error);
  d = blob_dataset(2, 64, 1);
  d.masks[1].at(3, 3) = std::numeric_limits<float>::quiet_NaN();
  cfg.batch_size = 2;
  try {
    train_pattern(d, cfg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::numeric);
  }
}

TEST_CASE("training defaults follow the published schedule") {
  const PatternTrainConfig c;
  CHECK(c.epochs == 300);
  CHECK(c.batch_size == 8);
  CHECK(c.lr == 1e-4);
  const auto back = PatternTrainConfig::from_json(c.to_json());
  CHECK(back.epochs == 300);
  CHECK(back.net.widths == c.net.widths);
  CHECK_THROWS_AS(PatternTrainConfig::from_json({{"batch_size", 0}}), Error);
}

TEST_CASE("training on empty masks drives predictions towards zero") {
  const PatternDataset d = blob_dataset(8, 64, 2, true);
  PatternTrainConfig cfg;
  cfg.net = small_net(3);
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.lr = 2e-3;
  const auto result = train_pattern(d, cfg);
  double mean = 0.0;
  for (const auto& t : d.textures) {
    const PatternMask m = predict_mask_raw(result.net, t);
    mean += std::accumulate(m.values().begin(), m.values().end(), 0.0) / static_cast<double>(m.pixel_count());
  }
  mean /= static_cast<double>(d.size());
  CHECK(mean < 0.1);
  for (const auto& e : result.log) CHECK(std::isfinite(e.loss));
}

TEST_CASE("training learns a separable blob task") {
  const PatternDataset train = blob_dataset(24, 64, 3);
  const PatternDataset test = blob_dataset(8, 64, 4);
  PatternTrainConfig cfg;
  cfg.net = small_net(5);
  cfg.epochs = 40;
  cfg.batch_size = 4;
  cfg.lr = 2e-3;
  const double before = evaluate_dice_loss(SegNet(cfg.net), test);
  const auto result = train_pattern(train, cfg);
  const double after = evaluate_dice_loss(result.net, test);
  INFO("held-out dice loss " << before << " -> " << after);
  CHECK(after < 0.5 * before);
  CHECK(result.log.back().loss < result.log.front().loss);
}

TEST_CASE("pattern checkpoints round trip, resume exactly and reject other kinds") {
  const PatternDataset d = blob_dataset(6, 64, 5);
  PatternTrainConfig cfg;
  cfg.net = small_net(6);
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.checkpoint_every = 1;
  cfg.checkpoint_dir = uvtest::temp_dir("pattern_full");
  const auto full = train_pattern(d, cfg);
  REQUIRE(full.checkpoints.size() == 2);
  CHECK(nn::parameter_checksum(load_seg_net(full.checkpoints[1]).state()) ==
        nn::parameter_checksum(full.net.state()));

  PatternTrainConfig resume = cfg;
  resume.checkpoint_dir = uvtest::temp_dir("pattern_resume");
  resume.resume = full.checkpoints[0];
  const auto resumed = train_pattern(d, resume);
  CHECK(resumed.log.size() == 1);
  CHECK(nn::parameter_checksum(resumed.net.state()) == nn::parameter_checksum(full.net.state()));

  nn::Checkpoint ck = full.net.to_checkpoint(0);
  ck.kind = "color";
  nn::save_checkpoint(cfg.checkpoint_dir / "wrong.uvmc", ck);
  CHECK_THROWS_AS(load_seg_net(cfg.checkpoint_dir / "wrong.uvmc"), Error);
}

TEST_CASE("encoder weights load by name") {
  const SegNet donor(small_net(7));
  SegNet net(small_net(8));
  const int n = net.load_encoder(donor.state());
  const auto a = donor.state();
  const auto b = net.state();
  int enc = 0;
  for (const auto& [k, t] : a) {
    if (k.rfind("enc.", 0) == 0) {
      ++enc;
      CHECK(b.at(k) == t);
    } else if (k.find("weight") != std::string::npos) {
      CHECK_FALSE(b.at(k) == t);
    }
  }
  CHECK(n == enc);
  CHECK(n > 0);
}
