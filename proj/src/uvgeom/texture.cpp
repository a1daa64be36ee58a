#include "uvmakeup/uvgeom/texture.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <limits>

#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/uvgeom/render.hpp"

namespace uvmakeup::uvgeom {
namespace {

/// Finite-difference tangent along one UV axis, central where both
/// neighbours are valid and one-sided otherwise.
bool tangent(const PositionMap& pos, int v, int u, int dv, int du, std::array<double, 3>& out) {
  const bool fwd = v + dv < pos.height() && u + du < pos.width() && pos.valid(v + dv, u + du);
  const bool back = v - dv >= 0 && u - du >= 0 && pos.valid(v - dv, u - du);
  const float* a = (back ? pos.point(v - dv, u - du) : pos.point(v, u));
  const float* b = (fwd ? pos.point(v + dv, u + du) : pos.point(v, u));
  if (!fwd && !back) return false;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<double>(b[i]) - a[i];
  return true;
}

}  // namespace

Plane texel_visibility(const PositionMap& pos, int image_height, int image_width) {
  const RasterResult raster = rasterize(pos, image_height, image_width);
  Plane vis(pos.height(), pos.width());
  for (int v = 0; v < pos.height(); ++v) {
    for (int u = 0; u < pos.width(); ++u) {
      if (!pos.valid(v, u)) continue;
      std::array<double, 3> du{};
      std::array<double, 3> dv{};
      if (!tangent(pos, v, u, 0, 1, du) || !tangent(pos, v, u, 1, 0, dv)) continue;
      const double nx = du[1] * dv[2] - du[2] * dv[1];
      const double ny = du[2] * dv[0] - du[0] * dv[2];
      const double nz = du[0] * dv[1] - du[1] * dv[0];
      if (nz <= 0.0) continue;
      const float* p = pos.point(v, u);
      const long x = std::lround(p[0]);
      const long y = std::lround(p[1]);
      if (x < 0 || y < 0 || x >= image_width || y >= image_height) continue;
      if (!raster.is_covered(static_cast<int>(y), static_cast<int>(x))) {
        vis.at(v, u) = 1.0f;
        continue;
      }
      // Depth slack covers the half-pixel offset to the sampled pixel center
      // on a sloped surface plus a small constant.
      const double slope = (std::abs(nx) + std::abs(ny)) / nz;
      const double slack = 0.5 + 0.75 * slope;
      if (p[2] + slack >= raster.at(static_cast<int>(y), static_cast<int>(x)).depth) {
        vis.at(v, u) = 1.0f;
      }
    }
  }
  return vis;
}

void zero_outside_valid(TextureMap& tex, const PositionMap& pos) {
  for (int v = 0; v < tex.height(); ++v) {
    for (int u = 0; u < tex.width(); ++u) {
      if (pos.valid(v, u)) continue;
      float* t = tex.pixel(v, u);
      t[0] = t[1] = t[2] = 0.0f;
    }
  }
}

TextureExtraction extract_texture(const Image& image, const PositionMap& pos) {
  check_fits_image(pos, image.height(), image.width());
  const int h = pos.height();
  const int w = pos.width();
  TextureExtraction out{TextureMap(h, w), texel_visibility(pos, image.height(), image.width()), 0};

  // Multi-source BFS from visible texels assigns every occluded valid texel
  // the color of its nearest visible texel (8-connected).
  std::vector<std::int32_t> source(static_cast<std::size_t>(h) * w, -1);
  std::deque<std::int32_t> queue;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (out.visibility.at(v, u) <= 0.5f) continue;
      const float* p = pos.point(v, u);
      const auto color = ops::sample_bilinear(image, p[0], p[1]);
      float* t = out.texture.pixel(v, u);
      t[0] = color[0];
      t[1] = color[1];
      t[2] = color[2];
      const auto idx = static_cast<std::int32_t>(v * w + u);
      source[idx] = idx;
      queue.push_back(idx);
    }
  }
  while (!queue.empty()) {
    const std::int32_t idx = queue.front();
    queue.pop_front();
    const int v = idx / w;
    const int u = idx % w;
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        const int nv = v + dv;
        const int nu = u + du;
        if (nv < 0 || nu < 0 || nv >= h || nu >= w || !pos.valid(nv, nu)) continue;
        const auto nidx = static_cast<std::int32_t>(nv * w + nu);
        if (source[nidx] >= 0) continue;
        source[nidx] = source[idx];
        queue.push_back(nidx);
      }
    }
  }
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!pos.valid(v, u) || out.visibility.at(v, u) > 0.5f) continue;
      ++out.occluded;
      const std::int32_t src = source[static_cast<std::size_t>(v) * w + u];
      if (src < 0) continue;
      const float* s = out.texture.pixel(src / w, src % w);
      float* t = out.texture.pixel(v, u);
      t[0] = s[0];
      t[1] = s[1];
      t[2] = s[2];
    }
  }
  return out;
}

}  // namespace uvmakeup::uvgeom
