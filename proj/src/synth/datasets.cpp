#include "uvmakeup/synth/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "uvmakeup/color/color_net.hpp"
#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/core/parallel.hpp"
#include "uvmakeup/synth/face_synth.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

namespace uvmakeup::synth {
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kChunk = 16;

std::string sample_id(const char* prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu", prefix, index);
  return buf;
}

TextureMap replicate(const Plane& p) {
  TextureMap t(p.height(), p.width());
  const auto src = p.values();
  auto dst = t.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i * 3] = dst[i * 3 + 1] = dst[i * 3 + 2] = src[i];
  return t;
}

Plane channel0(const RgbRaster& r) {
  Plane p(r.height(), r.width());
  for (std::size_t i = 0; i < p.pixel_count(); ++i) p.values()[i] = r.values()[i * 3];
  return p;
}

/// Rendered support of a UV plane in image space.
Plane render_plane(const uvgeom::PositionMap& pos, const Plane& uv, int h, int w) {
  return channel0(uvgeom::render(pos, replicate(uv), Image(h, w)).image);
}

/// Appends records and files to a dataset root and keeps the digest current.
class DatasetWriter {
 public:
  DatasetWriter(const fs::path& root, const std::string& kind) : root_(root) {
    fs::create_directories(root);
    const fs::path info = root / "dataset.json";
    if (fs::exists(info)) {
      const auto j = nlohmann::json::parse(io::read_text(info));
      require(j.value("kind", "") == kind, ErrorCategory::invalid_argument,
              root.string() + " holds a '" + j.value("kind", "") + "' dataset, not '" + kind + "'");
    } else {
      io::write_text(info, nlohmann::json{{"kind", kind}, {"format", 1}}.dump(2) + "\n");
    }
    existing_ = read_manifest(root).size();
  }

  std::size_t existing() const { return existing_; }

  /// Writes `bytes` to root/rel and records its hash under `key`.
  void put(nlohmann::json& record, const std::string& key, const std::string& rel,
           const std::vector<std::uint8_t>& bytes) {
    const fs::path path = root_ / rel;
    fs::create_directories(path.parent_path());
    io::write_file(path, bytes);
    record["files"][key] = rel;
    record["sha256"][key] = sha256_hex(bytes);
  }

  void append(const nlohmann::json& record) {
    std::ofstream out(root_ / "manifest.jsonl", std::ios::app | std::ios::binary);
    require(out.good(), ErrorCategory::io, "cannot append to " + (root_ / "manifest.jsonl").string());
    out << record.dump() << '\n';
  }

  void finish() {
    const fs::path manifest = root_ / "manifest.jsonl";
    const std::string digest = fs::exists(manifest) ? sha256_file(manifest) : sha256_hex(std::string());
    io::write_text(root_ / "manifest.sha256", digest + "  manifest.jsonl\n");
  }

 private:
  fs::path root_;
  std::size_t existing_ = 0;
};

std::vector<std::size_t> indices_where(const std::vector<bool>& flags, bool value) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i] == value) out.push_back(i);
  return out;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& items, const std::vector<std::size_t>& pool) {
  return items[pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))]];
}

}  // namespace

FaceSet FaceSet::load(const fs::path& dir, const uvgeom::GeometryProvider& provider, const FaceSetOptions& options) {
  require(fs::is_directory(dir), ErrorCategory::not_found, "face directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  FaceSet set;
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    Image img = io::read_png(f);
    if (img.height() < options.min_size || img.width() < options.min_size) {
      spdlog::info("face {} is {}x{}, below {}; discarded", id, img.width(), img.height(), options.min_size);
      set.skipped.push_back(id);
      continue;
    }
    const bool resized = img.height() != options.image_size || img.width() != options.image_size;
    if (resized) img = Image(ops::resize_bilinear(img, options.image_size, options.image_size));
    try {
      const fs::path sidecar = uvgeom::sidecar_path(f);
      uvgeom::PositionMap pos = (!resized && fs::exists(sidecar)) ? uvgeom::read_uvpm(sidecar) : provider.estimate(img);
      require(pos.height() == provider.uv_size(), ErrorCategory::geometry_mismatch,
              "position map size differs from the provider's UV size");
      set.faces.push_back({id, std::move(img), std::move(pos)});
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::geometry_failure && e.category() != ErrorCategory::geometry_mismatch) throw;
      spdlog::warn("face {} skipped: {}", id, e.what());
      set.skipped.push_back(id);
    }
  }
  return set;
}

FaceSet make_faces(int n, std::uint64_t seed, bool makeup) {
  require(n >= 1, ErrorCategory::invalid_argument, "make_faces needs n >= 1");
  const uvgeom::ParametricFace face;
  const uvgeom::UvLayout layout;
  FaceSet set;
  set.faces.resize(static_cast<std::size_t>(n));
  parallel_for(set.faces.size(), 0, [&](std::size_t i) {
    const SubjectParams subject = random_subject(i, seed);
    TextureMap tex = face_texture(subject, layout);
    if (makeup) tex = apply_makeup(tex, random_style(i, seed), layout);
    RenderedSubject r = render_subject(subject, tex, face);
    char id[32];
    std::snprintf(id, sizeof id, "face%04zu", i);
    set.faces[i] = {id, std::move(r.image), std::move(r.position)};
  });
  return set;
}

FaceSet make_faces(const fs::path& dir, int n, std::uint64_t seed, bool makeup) {
  FaceSet set = make_faces(n, seed, makeup);
  fs::create_directories(dir);
  std::string lines;
  for (std::size_t i = 0; i < set.faces.size(); ++i) {
    const auto& f = set.faces[i];
    io::write_png(dir / (f.id + ".png"), f.image);
    uvgeom::write_uvpm(dir / (f.id + ".uvpm"), f.position);
    nlohmann::json j{{"id", f.id}, {"subject", to_json(random_subject(i, seed))}, {"seed", seed}};
    if (makeup) j["style"] = to_json(random_style(i, seed));
    lines += j.dump() + "\n";
  }
  io::write_text(dir / "faces.jsonl", lines);
  return set;
}

std::vector<bool> partition(std::size_t n, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCategory::invalid_argument, "test fraction must lie in [0,1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x9a7);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_int(rng, 0, static_cast<int>(i) - 1)]);
  auto n_test = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  if (n >= 2 && fraction > 0.0 && fraction < 1.0) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<bool> test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) test[order[i]] = true;
  return test;
}

Synt1Sample make_synt1_sample(const FaceRecord& face, const Sticker& sticker, const PlacementParams& p) {
  Synt1Sample s;
  s.face_id = face.id;
  s.sticker = sticker.name;
  s.placement = p;
  s.position = face.position;
  s.base_texture = uvgeom::extract_texture(face.image, face.position).texture;
  BlendResult blended = blend_sticker(s.base_texture, sticker, p);
  s.texture = std::move(blended.texture);
  s.mask = std::move(blended.mask);
  s.image = uvgeom::render(face.position, s.texture, face.image).image;
  s.image_mask = render_plane(face.position, s.mask, face.image.height(), face.image.width());
  return s;
}

std::vector<nlohmann::json> generate_synt1(const FaceSet& faces, const std::vector<Sticker>& stickers,
                                           const Synt1Options& options, const fs::path& root) {
  require(!faces.faces.empty(), ErrorCategory::empty_dataset, "synt1 needs at least one face");
  require(!stickers.empty(), ErrorCategory::empty_dataset, "synt1 needs at least one sticker");
  require(options.n >= 0, ErrorCategory::invalid_argument, "n must be non-negative");
  const auto face_test = partition(faces.faces.size(), options.test_fraction, derive_seed(options.seed, 1));
  const auto sticker_test = partition(stickers.size(), options.test_fraction, derive_seed(options.seed, 2));
  const std::vector<std::size_t> pools[2][2] = {
      {indices_where(face_test, false), indices_where(sticker_test, false)},
      {indices_where(face_test, true), indices_where(sticker_test, true)}};
  const bool has_test = !pools[1][0].empty() && !pools[1][1].empty();
  require(!pools[0][0].empty() && !pools[0][1].empty(), ErrorCategory::empty_dataset,
          "synt1 train split has no faces or no stickers");

  DatasetWriter writer(root, "synt1");
  const std::size_t first = writer.existing();
  const uvgeom::UvLayout layout(faces.faces.front().position.height());
  std::vector<nlohmann::json> records;
  std::vector<Synt1Sample> chunk;
  for (std::size_t c0 = 0; c0 < static_cast<std::size_t>(options.n); c0 += kChunk) {
    const std::size_t count = std::min(kChunk, static_cast<std::size_t>(options.n) - c0);
    chunk.assign(count, {});
    parallel_for(count, options.threads, [&](std::size_t k) {
      const std::size_t index = first + c0 + k;
      const std::uint64_t stream = derive_seed(options.seed, 1000 + index);
      Rng rng = make_rng(stream, 0);
      const bool test = has_test && uniform(rng) < options.test_fraction;
      const FaceRecord& face = pick(rng, faces.faces, pools[test][0]);
      const Sticker& sticker = pick(rng, stickers, pools[test][1]);
      const PlacementParams p = draw_placement(stream, layout, options.placement);
      Synt1Sample s = make_synt1_sample(face, sticker, p);
      s.id = sample_id("s1", index);
      s.split = test ? "test" : "train";
      chunk[k] = std::move(s);
    });
    for (const auto& s : chunk) {
      nlohmann::json r{{"id", s.id},           {"split", s.split},     {"face", s.face_id},
                       {"sticker", s.sticker}, {"placement", to_json(s.placement)}, {"seed", options.seed}};
      writer.put(r, "image", "images/" + s.id + ".png", io::encode_png_rgb(s.image));
      writer.put(r, "texture", "textures/" + s.id + ".png", io::encode_png_rgb(s.texture));
      writer.put(r, "position", "textures/" + s.id + ".uvpm", uvgeom::encode_uvpm(s.position));
      writer.put(r, "mask", "masks/" + s.id + ".png", io::encode_png_gray(s.mask));
      writer.put(r, "image_mask", "masks/" + s.id + "_image.png", io::encode_png_gray(s.image_mask));
      writer.append(r);
      records.push_back(std::move(r));
    }
  }
  writer.finish();
  spdlog::info("synt1: wrote {} samples to {}", records.size(), root.string());
  return records;
}

ColorTransferFn color_net_transfer(const color::ColorNet& net) {
  return [&net](const TextureMap& src, const TextureMap& style) { return color::swap(net, src, style).first; };
}

Synt2Triplet make_synt2_triplet(const FaceRecord& a, const FaceRecord& b, const FaceRecord& style,
                                const Sticker& sticker, const PlacementParams& p, const ColorTransferFn& transfer) {
  Synt2Triplet t;
  t.source_face = a.id;
  t.reference_face = b.id;
  t.style = style.id;
  t.sticker = sticker.name;
  t.placement = p;
  t.source_position = a.position;
  t.reference_position = b.position;
  const TextureMap style_tex = uvgeom::extract_texture(style.image, style.position).texture;
  const TextureMap ta = transfer(uvgeom::extract_texture(a.image, a.position).texture, style_tex);
  const TextureMap tb = transfer(uvgeom::extract_texture(b.image, b.position).texture, style_tex);
  BlendResult ga = blend_sticker(ta, sticker, p);
  BlendResult rb = blend_sticker(tb, sticker, p);
  t.source = uvgeom::render(a.position, ta, a.image).image;
  t.ground_truth = uvgeom::render(a.position, ga.texture, a.image).image;
  t.reference = uvgeom::render(b.position, rb.texture, b.image).image;
  t.mask = std::move(ga.mask);
  t.reference_mask = std::move(rb.mask);
  return t;
}

std::vector<nlohmann::json> generate_synt2(const FaceSet& faces, const FaceSet& styles,
                                           const std::vector<Sticker>& stickers, const ColorTransferFn& transfer,
                                           const Synt2Options& options, const fs::path& root) {
  require(faces.faces.size() >= 2, ErrorCategory::empty_dataset, "synt2 needs at least two faces");
  require(!styles.faces.empty(), ErrorCategory::empty_dataset, "synt2 needs at least one color style");
  require(!stickers.empty(), ErrorCategory::empty_dataset, "synt2 needs at least one sticker");
  require(static_cast<bool>(transfer), ErrorCategory::model_missing, "synt2 needs a color transfer");
  DatasetWriter writer(root, "synt2");
  const std::size_t first = writer.existing();
  const uvgeom::UvLayout layout(faces.faces.front().position.height());
  std::vector<std::size_t> all_faces(faces.faces.size());
  std::iota(all_faces.begin(), all_faces.end(), std::size_t{0});

  std::vector<nlohmann::json> records;
  std::vector<Synt2Triplet> chunk;
  for (std::size_t c0 = 0; c0 < static_cast<std::size_t>(options.n); c0 += kChunk) {
    const std::size_t count = std::min(kChunk, static_cast<std::size_t>(options.n) - c0);
    chunk.assign(count, {});
    parallel_for(count, options.threads, [&](std::size_t k) {
      const std::size_t index = first + c0 + k;
      const std::uint64_t stream = derive_seed(options.seed, 5000 + index);
      Rng rng = make_rng(stream, 0);
      const int nf = static_cast<int>(faces.faces.size());
      const int ia = uniform_int(rng, 0, nf - 1);
      int ib = uniform_int(rng, 0, nf - 2);
      if (ib >= ia) ++ib;
      const FaceRecord& style = styles.faces[uniform_int(rng, 0, static_cast<int>(styles.faces.size()) - 1)];
      const Sticker& sticker = stickers[uniform_int(rng, 0, static_cast<int>(stickers.size()) - 1)];
      const PlacementParams p = draw_placement(stream, layout, options.placement);
      Synt2Triplet t = make_synt2_triplet(faces.faces[ia], faces.faces[ib], style, sticker, p, transfer);
      t.id = sample_id("s2", index);
      chunk[k] = std::move(t);
    });
    for (const auto& t : chunk) {
      nlohmann::json r{{"id", t.id},
                       {"source_face", t.source_face},
                       {"reference_face", t.reference_face},
                       {"style", t.style},
                       {"sticker", t.sticker},
                       {"placement", to_json(t.placement)},
                       {"seed", options.seed}};
      writer.put(r, "source", "source/" + t.id + ".png", io::encode_png_rgb(t.source));
      writer.put(r, "source_position", "source/" + t.id + ".uvpm", uvgeom::encode_uvpm(t.source_position));
      writer.put(r, "reference", "reference/" + t.id + ".png", io::encode_png_rgb(t.reference));
      writer.put(r, "reference_position", "reference/" + t.id + ".uvpm", uvgeom::encode_uvpm(t.reference_position));
      writer.put(r, "ground_truth", "ground_truth/" + t.id + ".png", io::encode_png_rgb(t.ground_truth));
      writer.put(r, "mask", "masks/" + t.id + ".png", io::encode_png_gray(t.mask));
      writer.append(r);
      records.push_back(std::move(r));
    }
  }
  writer.finish();
  spdlog::info("synt2: wrote {} triplets to {}", records.size(), root.string());
  return records;
}

std::vector<nlohmann::json> read_manifest(const fs::path& root) {
  std::vector<nlohmann::json> out;
  const fs::path path = root / "manifest.jsonl";
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::io, "malformed manifest line " + std::to_string(n) + " in " + path.string(), e.what());
    }
  }
  return out;
}

void verify_manifest(const fs::path& root) {
  const fs::path manifest = root / "manifest.jsonl";
  require(fs::exists(manifest), ErrorCategory::not_found, "no manifest in " + root.string());
  const std::string recorded = io::read_text(root / "manifest.sha256").substr(0, 64);
  require(recorded == sha256_file(manifest), ErrorCategory::io, "manifest digest mismatch in " + root.string());
  for (const auto& r : read_manifest(root)) {
    for (const auto& [key, rel] : r.at("files").items()) {
      const std::string expect = r.at("sha256").at(key);
      require(sha256_file(root / rel.get<std::string>()) == expect, ErrorCategory::io,
              "checksum mismatch for " + rel.get<std::string>());
    }
  }
}

pattern::PatternDataset load_synt1(const fs::path& root, const std::string& split) {
  const auto records = read_manifest(root);
  require(!records.empty(), ErrorCategory::empty_dataset, "no synt1 samples in " + root.string());
  pattern::PatternDataset d;
  for (const auto& r : records) {
    if (!split.empty() && r.value("split", "") != split) continue;
    d.textures.emplace_back(io::read_png(root / r.at("files").at("texture").get<std::string>()));
    d.masks.push_back(io::read_png_gray(root / r.at("files").at("mask").get<std::string>()));
  }
  require(!d.textures.empty(), ErrorCategory::empty_dataset, "no '" + split + "' samples in " + root.string());
  return d;
}

}  // namespace uvmakeup::synth
