#include "uvmakeup/synth/sticker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace uvmakeup::synth {
namespace fs = std::filesystem;

namespace {

using Color = std::array<float, 3>;

Color hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r = v, g = t, b = p;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {float(r), float(g), float(b)};
}

/// Signed distance (negative inside, normalized units) and color at (x, y).
struct Sample {
  double d;
  Color color;
  float alpha = 1.0f;
};

double polar_radius_distance(double x, double y, double radius) { return std::hypot(x, y) - radius; }

double star_distance(double x, double y, int points, double outer, double inner, double phase) {
  const double r = std::hypot(x, y);
  double th = std::atan2(y, x) - phase;
  const double sector = 2.0 * std::numbers::pi / points;
  th = std::fmod(std::fmod(th, sector) + sector, sector);
  const double f = std::abs(th / sector - 0.5) * 2.0;  // 1 at tips, 0 between
  return r - (inner + (outer - inner) * f);
}

double heart_distance(double x, double y) {
  // Implicit heart; the value is rescaled into a rough distance.
  const double X = x * 1.25;
  const double Y = -y * 1.25 + 0.25;
  const double a = X * X + Y * Y - 1.0;
  const double f = a * a * a - X * X * Y * Y * Y;
  return std::cbrt(f) * 0.45;
}

}  // namespace

Sticker Sticker::from_rgba8(std::string name, const io::Rgba8& px) {
  Sticker s{std::move(name), Raster<4>(px.height, px.width)};
  auto dst = s.rgba.values();
  for (std::size_t i = 0; i < px.pixels.size(); ++i) dst[i] = px.pixels[i] / 255.0f;
  return s;
}

io::Rgba8 Sticker::to_rgba8() const {
  io::Rgba8 px{rgba.height(), rgba.width(), {}};
  px.pixels.reserve(rgba.values().size());
  for (float v : rgba.values()) px.pixels.push_back(io::to_u8(v));
  return px;
}

std::string shape_name(StickerShape s) {
  switch (s) {
    case StickerShape::flower: return "flower";
    case StickerShape::star: return "star";
    case StickerShape::heart: return "heart";
    case StickerShape::gem: return "gem";
    case StickerShape::leaf: return "leaf";
    case StickerShape::swirl: return "swirl";
    case StickerShape::dots: return "dots";
    case StickerShape::daisy: return "daisy";
  }
  return "unknown";
}

Sticker make_sticker(StickerShape shape, std::uint64_t seed, int size) {
  require(size >= 8, ErrorCategory::invalid_argument, "sticker size must be at least 8");
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(shape) + 101);
  const double hue = uniform(rng);
  const Color main = hsv(hue, uniform(rng, 0.75, 1.0), uniform(rng, 0.55, 0.95));
  const Color accent = hsv(hue + uniform(rng, 0.35, 0.65), uniform(rng, 0.7, 1.0), uniform(rng, 0.7, 1.0));
  const Color dark{0.06f, 0.05f, 0.08f};
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const int petals = uniform_int(rng, 5, 7);

  std::vector<std::array<double, 3>> dots;
  if (shape == StickerShape::dots) {
    dots.push_back({0.0, 0.0, 0.3});
    for (int i = 0; i < 5; ++i) {
      const double a = phase + i * 2.0 * std::numbers::pi / 5.0;
      dots.push_back({0.64 * std::cos(a), 0.64 * std::sin(a), uniform(rng, 0.24, 0.3)});
    }
  }

  auto eval = [&](double x, double y) -> Sample {
    switch (shape) {
      case StickerShape::flower: {
        const double th = std::atan2(y, x) - phase;
        const double d = std::hypot(x, y) - (0.6 + 0.3 * std::cos(petals * th));
        const bool core = std::hypot(x, y) < 0.25;
        return {d, core ? accent : main};
      }
      case StickerShape::star:
        return {star_distance(x, y, 5, 0.95, 0.42, phase), main};
      case StickerShape::heart:
        return {heart_distance(x, y), main};
      case StickerShape::gem: {
        const double d = (std::abs(x) / 0.7 + std::abs(y) / 0.95 - 1.0) * 0.6;
        const bool facet = (x > 0) != (y > 0);
        return {d, facet ? accent : main, 0.92f};
      }
      case StickerShape::leaf: {
        const double c = std::cos(phase), s = std::sin(phase);
        const double u = c * x + s * y, v = -s * x + c * y;
        const double d = std::max(std::hypot(u, v - 0.55) - 1.05, std::hypot(u, v + 0.55) - 1.05);
        const bool vein = std::abs(v) < 0.035 && std::abs(u) < 0.8;
        return {d, vein ? accent : main};
      }
      case StickerShape::swirl: {
        const double r = std::hypot(x, y);
        const double th = std::atan2(y, x) + std::numbers::pi;
        const double turn = r / 0.9 * 1.2 - th / (2.0 * std::numbers::pi) * 0.5;
        const double band = std::abs(turn - std::round(turn)) * 0.75 - 0.2;
        return {std::max(band, r - 0.95), dark};
      }
      case StickerShape::dots: {
        double d = 1e9;
        for (const auto& dot : dots) d = std::min(d, polar_radius_distance(x - dot[0], y - dot[1], dot[2]));
        return {d, std::hypot(x, y) < 0.3 ? accent : main};
      }
      case StickerShape::daisy: {
        const double th = std::atan2(y, x) - phase;
        const double sector = 2.0 * std::numbers::pi / 8.0;
        const double local = std::fmod(std::fmod(th, sector) + sector, sector) - sector / 2.0;
        const double r = std::hypot(x, y);
        const double petal = std::max(std::abs(r * std::sin(local)) - 0.15, r - 0.95);
        const double center = r - 0.28;
        if (center < 0.0) return {center, Color{0.98f, 0.82f, 0.1f}};
        return {std::min(petal, center), Color{0.97f, 0.97f, 0.97f}};
      }
    }
    return {1.0, main};
  };

  Sticker st{shape_name(shape) + "_" + std::to_string(seed), Raster<4>(size, size)};
  const double aa = 2.0 / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double nx = (x + 0.5) / size * 2.0 - 1.0;
      const double ny = (y + 0.5) / size * 2.0 - 1.0;
      const Sample s = eval(nx, ny);
      const double cover = std::clamp(0.5 - s.d / aa, 0.0, 1.0);
      float* p = st.rgba.pixel(y, x);
      p[0] = s.color[0];
      p[1] = s.color[1];
      p[2] = s.color[2];
      p[3] = static_cast<float>(cover) * s.alpha;
    }
  }
  return st;
}

std::vector<Sticker> make_sticker_set(int n, std::uint64_t seed, int size) {
  std::vector<Sticker> out;
  for (int i = 0; i < n; ++i) {
    Sticker s = make_sticker(static_cast<StickerShape>(i % kStickerShapes), derive_seed(seed, i), size);
    char name[48];
    std::snprintf(name, sizeof name, "st%04d_%s", i, shape_name(static_cast<StickerShape>(i % kStickerShapes)).c_str());
    s.name = name;
    out.push_back(std::move(s));
  }
  return out;
}

StickerLibrary StickerLibrary::load(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCategory::not_found, "sticker directory " + dir.string() + " not found");
  std::vector<std::pair<std::string, fs::path>> entries;
  const fs::path index = dir / "index.json";
  if (fs::exists(index)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_text(index));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::invalid_argument, "malformed sticker index " + index.string(), e.what());
    }
    for (const auto& s : j.at("stickers")) entries.emplace_back(s.at("name"), dir / s.at("file").get<std::string>());
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) entries.emplace_back(f.stem().string(), f);
  }
  StickerLibrary lib;
  for (const auto& [name, path] : entries) {
    const auto bytes = io::read_file(path);
    if (!io::png_has_alpha(bytes)) {
      spdlog::warn("sticker {} has no alpha channel; skipped", path.string());
      lib.rejected.push_back(name);
      continue;
    }
    lib.stickers.push_back(Sticker::from_rgba8(name, io::decode_png_rgba(bytes)));
  }
  require(!lib.stickers.empty(), ErrorCategory::empty_dataset, "no usable stickers in " + dir.string());
  return lib;
}

void StickerLibrary::save(const fs::path& dir, const std::vector<Sticker>& stickers) {
  fs::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : stickers) {
    const std::string file = s.name + ".png";
    io::write_png(dir / file, s.to_rgba8());
    list.push_back({{"name", s.name}, {"file", file}});
  }
  io::write_text(dir / "index.json", nlohmann::json{{"stickers", list}}.dump(2) + "\n");
}

bool in_central_ninth(const uvgeom::UvLayout& layout, double u, double v) {
  const auto b = layout.valid_bbox();
  const double w = (b[2] - b[0] + 1) / 3.0;
  const double h = (b[3] - b[1] + 1) / 3.0;
  return u >= b[0] + w && u < b[0] + 2 * w && v >= b[1] + h && v < b[1] + 2 * h;
}

void PlacementParams::validate(const uvgeom::UvLayout& layout) const {
  require(std::isfinite(scale) && scale >= 0.5 && scale <= 1.5, ErrorCategory::invalid_argument,
          "sticker scale must lie in [0.5, 1.5] cheek diameters");
  require(std::isfinite(opacity) && opacity >= 0.0 && opacity <= 1.0, ErrorCategory::invalid_argument,
          "sticker opacity must lie in [0, 1]");
  const long u = std::lround(center_u);
  const long v = std::lround(center_v);
  require(u >= 0 && v >= 0 && u < layout.size() && v < layout.size() && layout.valid(int(v), int(u)),
          ErrorCategory::invalid_argument, "sticker center lies outside the face region");
  require(!in_central_ninth(layout, center_u, center_v), ErrorCategory::invalid_argument,
          "sticker center lies in the central ninth of the face");
}

nlohmann::json to_json(const PlacementParams& p) {
  return {{"scale", p.scale}, {"center_u", p.center_u}, {"center_v", p.center_v},
          {"opacity", p.opacity}, {"seed", p.seed}};
}

PlacementParams placement_from_json(const nlohmann::json& j) {
  PlacementParams p;
  p.scale = j.at("scale");
  p.center_u = j.at("center_u");
  p.center_v = j.at("center_v");
  p.opacity = j.at("opacity");
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

PlacementParams draw_placement(std::uint64_t seed, const uvgeom::UvLayout& layout, const PlacementRange& range) {
  Rng rng = make_rng(seed, 0x57c);
  PlacementParams p;
  p.seed = seed;
  p.scale = uniform(rng, range.min_scale, range.max_scale);
  p.opacity = uniform(rng, range.min_opacity, range.max_opacity);
  const auto b = layout.valid_bbox();
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double u = uniform(rng, b[0], b[2]);
    const double v = uniform(rng, b[1], b[3]);
    const long iu = std::lround(u);
    const long iv = std::lround(v);
    if (!layout.valid(int(iv), int(iu)) || in_central_ninth(layout, u, v)) continue;
    if (uvgeom::UvLayout::face_outline().radius(layout.s_of(u), layout.t_of(v)) > range.max_radius) continue;
    p.center_u = u;
    p.center_v = v;
    return p;
  }
  fail(ErrorCategory::invalid_argument, "could not draw a sticker placement");
}

BlendResult blend_sticker(const TextureMap& tex, const Sticker& sticker, const PlacementParams& p) {
  require(tex.height() == tex.width(), ErrorCategory::shape_mismatch, "textures are square");
  const uvgeom::UvLayout layout(tex.height());
  p.validate(layout);
  BlendResult out{tex, PatternMask(tex.height(), tex.width())};

  const int sh = sticker.rgba.height();
  const int sw = sticker.rgba.width();
  const double width = p.scale * layout.cheek_diameter();
  const double texel_to_sticker = sw / width;  // sticker pixels per texel
  const double height = sh / texel_to_sticker;
  const int u0 = std::max(0, int(std::floor(p.center_u - width / 2 - 1)));
  const int u1 = std::min(tex.width() - 1, int(std::ceil(p.center_u + width / 2 + 1)));
  const int v0 = std::max(0, int(std::floor(p.center_v - height / 2 - 1)));
  const int v1 = std::min(tex.height() - 1, int(std::ceil(p.center_v + height / 2 + 1)));

  // Bilinear fetch of premultiplied color and alpha; outside the sticker is transparent.
  auto fetch = [&](int y, int x, std::array<double, 4>& acc, double w) {
    if (x < 0 || y < 0 || x >= sw || y >= sh) return;
    const float* s = sticker.rgba.pixel(y, x);
    const double a = s[3];
    acc[0] += w * a * s[0];
    acc[1] += w * a * s[1];
    acc[2] += w * a * s[2];
    acc[3] += w * a;
  };

  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      if (!layout.valid(v, u)) continue;
      const double sx = (u - p.center_u) * texel_to_sticker + sw / 2.0 - 0.5;
      const double sy = (v - p.center_v) * texel_to_sticker + sh / 2.0 - 0.5;
      const int x0 = int(std::floor(sx));
      const int y0 = int(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      std::array<double, 4> acc{};
      fetch(y0, x0, acc, (1 - fx) * (1 - fy));
      fetch(y0, x0 + 1, acc, fx * (1 - fy));
      fetch(y0 + 1, x0, acc, (1 - fx) * fy);
      fetch(y0 + 1, x0 + 1, acc, fx * fy);
      const double alpha = acc[3] * p.opacity;
      if (alpha <= 0.0) continue;
      float* t = out.texture.pixel(v, u);
      for (int c = 0; c < 3; ++c) t[c] = static_cast<float>((1.0 - alpha) * t[c] + p.opacity * acc[c]);
      out.mask.at(v, u) = static_cast<float>(alpha);
    }
  }
  return out;
}

}  // namespace uvmakeup::synth
