#include "uvmakeup/core/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace uvmakeup::ops {

template <int C>
std::array<float, C> sample_bilinear(const Raster<C>& r, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(r.width() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(r.height() - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, r.width() - 1);
  const int y1 = std::min(y0 + 1, r.height() - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  std::array<float, C> out{};
  const float* p00 = r.pixel(y0, x0);
  const float* p01 = r.pixel(y0, x1);
  const float* p10 = r.pixel(y1, x0);
  const float* p11 = r.pixel(y1, x1);
  for (int c = 0; c < C; ++c) {
    const double top = p00[c] + (p01[c] - p00[c]) * fx;
    const double bottom = p10[c] + (p11[c] - p10[c]) * fx;
    out[c] = static_cast<float>(top + (bottom - top) * fy);
  }
  return out;
}

template <int C>
Raster<C> gaussian_blur(const Raster<C>& r, double sigma) {
  if (sigma <= 0.0) return r;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = r.height();
  const int w = r.width();
  Raster<C> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * r.at(y, std::clamp(x + i, 0, w - 1), c);
        }
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  Raster<C> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

template <int C>
Raster<C> resize_bilinear(const Raster<C>& r, int height, int width) {
  if (height == r.height() && width == r.width()) return r;
  Raster<C> out(height, width);
  const double sy = static_cast<double>(r.height()) / height;
  const double sx = static_cast<double>(r.width()) / width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto v = sample_bilinear(r, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
      for (int c = 0; c < C; ++c) out.at(y, x, c) = v[c];
    }
  }
  return out;
}

double psnr(const RgbRaster& a, const RgbRaster& b, const Plane& region) {
  require_same_size(a, b, "psnr");
  const bool masked = !region.empty();
  if (masked) require_same_size(a, region, "psnr region");
  double sq = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (masked && region.at(y, x) <= 0.5f) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a.at(y, x, c)) - b.at(y, x, c);
        sq += d * d;
      }
      count += 3;
    }
  }
  if (count == 0) return 0.0;
  const double mse = sq / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

Plane erode(const Plane& mask, int radius) {
  const int h = mask.height();
  const int w = mask.width();
  // Separable min filter over a square element.
  Plane tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = 1.0f;
      for (int i = -radius; i <= radius && m > 0.0f; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w || mask.at(y, xx) <= 0.5f) m = 0.0f;
      }
      tmp.at(y, x) = m;
    }
  }
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = 1.0f;
      for (int i = -radius; i <= radius && m > 0.0f; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h || tmp.at(yy, x) <= 0.5f) m = 0.0f;
      }
      out.at(y, x) = m;
    }
  }
  return out;
}

Plane luminance(const RgbRaster& image) {
  Plane out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const float* p = image.pixel(y, x);
      out.at(y, x) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return out;
}

template std::array<float, 1> sample_bilinear<1>(const Raster<1>&, double, double);
template std::array<float, 3> sample_bilinear<3>(const Raster<3>&, double, double);
template Raster<1> gaussian_blur(const Raster<1>&, double);
template Raster<3> gaussian_blur(const Raster<3>&, double);
template Raster<1> resize_bilinear(const Raster<1>&, int, int);
template Raster<3> resize_bilinear(const Raster<3>&, int, int);

}  // namespace uvmakeup::ops
