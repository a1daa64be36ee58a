#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uvmakeup/core/raster.hpp"

namespace uvmakeup::io {

/// 8-bit RGBA raster as stored in sticker PNGs.
struct Rgba8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // RGBA interleaved
};

std::vector<std::uint8_t> encode_png_rgb(const RgbRaster& image);
std::vector<std::uint8_t> encode_png_gray(const Plane& plane);
std::vector<std::uint8_t> encode_png_rgba(const Rgba8& image);

/// Decodes any libpng-readable PNG into RGB floats in [0,1]; alpha is dropped.
Image decode_png_rgb(const std::vector<std::uint8_t>& bytes);
Plane decode_png_gray(const std::vector<std::uint8_t>& bytes);
Rgba8 decode_png_rgba(const std::vector<std::uint8_t>& bytes);
bool png_has_alpha(const std::vector<std::uint8_t>& bytes);

void write_png(const std::filesystem::path& path, const RgbRaster& image);
void write_png(const std::filesystem::path& path, const Plane& plane);
void write_png(const std::filesystem::path& path, const Rgba8& image);
Image read_png(const std::filesystem::path& path);
Plane read_png_gray(const std::filesystem::path& path);
Rgba8 read_png_rgba(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

inline std::uint8_t to_u8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(c * 255.0f + 0.5f);
}

}  // namespace uvmakeup::io
