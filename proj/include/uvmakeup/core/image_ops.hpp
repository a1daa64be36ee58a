#pragma once

#include <array>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::ops {

/// Bilinear lookup at continuous pixel coordinates (integer = pixel center).
/// Coordinates are clamped to the raster border.
template <int C>
std::array<float, C> sample_bilinear(const Raster<C>& r, double x, double y);

/// Separable Gaussian blur with clamp-to-edge borders; radius = ceil(3 sigma).
template <int C>
Raster<C> gaussian_blur(const Raster<C>& r, double sigma);

template <int C>
Raster<C> resize_bilinear(const Raster<C>& r, int height, int width);

/// PSNR in dB over pixels where `region` > 0.5 (all pixels when region is empty).
double psnr(const RgbRaster& a, const RgbRaster& b, const Plane& region = {});

/// Erodes a binary plane (values > 0.5) by `radius` pixels with a square element.
Plane erode(const Plane& mask, int radius);

Plane luminance(const RgbRaster& image);

}  // namespace uvmakeup::ops
