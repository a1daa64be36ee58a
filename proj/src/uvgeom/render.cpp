#include "uvmakeup/uvgeom/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uvmakeup/core/image_ops.hpp"

namespace uvmakeup::uvgeom {
namespace {

struct Vertex {
  double x;
  double y;
  double z;
  std::int32_t texel;
};

void raster_triangle(const Vertex& a, const Vertex& b, const Vertex& c, RasterResult& out) {
  const double area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  if (std::abs(area) < 1e-12) return;
  const double inv = 1.0 / area;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x, b.x, c.x}))));
  const int x1 = std::min(out.width - 1, static_cast<int>(std::floor(std::max({a.x, b.x, c.x}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y, b.y, c.y}))));
  const int y1 = std::min(out.height - 1, static_cast<int>(std::floor(std::max({a.y, b.y, c.y}))));
  constexpr double kEdgeTolerance = -1e-9;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double wa = ((b.x - x) * (c.y - y) - (c.x - x) * (b.y - y)) * inv;
      const double wb = ((c.x - x) * (a.y - y) - (a.x - x) * (c.y - y)) * inv;
      const double wc = 1.0 - wa - wb;
      if (wa < kEdgeTolerance || wb < kEdgeTolerance || wc < kEdgeTolerance) continue;
      const double z = wa * a.z + wb * b.z + wc * c.z;
      const std::size_t p = static_cast<std::size_t>(y) * out.width + x;
      Fragment& f = out.fragments[p];
      if (out.covered[p] && z <= f.depth) continue;
      out.covered[p] = 1;
      f.depth = static_cast<float>(z);
      f.texel[0] = a.texel;
      f.texel[1] = b.texel;
      f.texel[2] = c.texel;
      f.weight[0] = static_cast<float>(wa);
      f.weight[1] = static_cast<float>(wb);
      f.weight[2] = static_cast<float>(wc);
    }
  }
}

}  // namespace

Plane RasterResult::coverage_plane() const {
  Plane out(height, width);
  auto values = out.values();
  for (std::size_t i = 0; i < covered.size(); ++i) values[i] = covered[i] ? 1.0f : 0.0f;
  return out;
}

RasterResult rasterize(const PositionMap& pos, int height, int width) {
  RasterResult out;
  out.height = height;
  out.width = width;
  out.fragments.assign(static_cast<std::size_t>(height) * width,
                       Fragment{-std::numeric_limits<float>::infinity(), {0, 0, 0}, {0, 0, 0}});
  out.covered.assign(static_cast<std::size_t>(height) * width, 0);
  const int uw = pos.width();
  auto vertex = [&](int v, int u) {
    const float* p = pos.point(v, u);
    return Vertex{p[0], p[1], p[2], static_cast<std::int32_t>(v * uw + u)};
  };
  for (int v = 0; v + 1 < pos.height(); ++v) {
    for (int u = 0; u + 1 < uw; ++u) {
      if (!pos.valid(v, u) || !pos.valid(v, u + 1) || !pos.valid(v + 1, u) ||
          !pos.valid(v + 1, u + 1)) {
        continue;
      }
      const Vertex a = vertex(v, u);
      const Vertex b = vertex(v, u + 1);
      const Vertex c = vertex(v + 1, u);
      const Vertex d = vertex(v + 1, u + 1);
      raster_triangle(a, b, c, out);
      raster_triangle(b, d, c, out);
      out.triangles += 2;
    }
  }
  return out;
}

RenderResult render(const PositionMap& pos, const TextureMap& tex, const Image& background,
                    const RenderOptions& options) {
  if (!pos.same_uv_size(tex)) {
    fail(ErrorCategory::shape_mismatch, "render: position map and texture UV sizes differ");
  }
  const int h = background.height();
  const int w = background.width();
  RenderResult result{background, Plane(h, w), Plane(h, w), false};
  const RasterResult raster = rasterize(pos, h, w);
  if (raster.triangles == 0) {
    result.empty_face = true;
    return result;
  }
  result.coverage = raster.coverage_plane();
  const Plane blurred = ops::gaussian_blur(result.coverage, options.feather_sigma);
  const auto texels = tex.values();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!raster.is_covered(y, x)) continue;
      const float a = options.feather_sigma > 0.0
                          ? std::clamp(2.0f * blurred.at(y, x) - 1.0f, 0.0f, 1.0f)
                          : 1.0f;
      result.alpha.at(y, x) = a;
      const Fragment& f = raster.at(y, x);
      float* out = result.image.pixel(y, x);
      for (int c = 0; c < 3; ++c) {
        const float face = f.weight[0] * texels[f.texel[0] * 3 + c] +
                           f.weight[1] * texels[f.texel[1] * 3 + c] +
                           f.weight[2] * texels[f.texel[2] * 3 + c];
        out[c] = std::clamp(a * face + (1.0f - a) * out[c], 0.0f, 1.0f);
      }
    }
  }
  return result;
}

}  // namespace uvmakeup::uvgeom
