#include "uvmakeup/uvgeom/position_map.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "uvmakeup/core/image_io.hpp"

namespace uvmakeup::uvgeom {

static_assert(std::endian::native == std::endian::little, "UVPM encoding assumes little-endian");

std::size_t PositionMap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid_) n += v != 0;
  return n;
}

Plane PositionMap::valid_plane() const {
  Plane out(height_, width_);
  auto values = out.values();
  for (std::size_t i = 0; i < valid_.size(); ++i) values[i] = valid_[i] ? 1.0f : 0.0f;
  return out;
}

void check_fits_image(const PositionMap& pos, int image_height, int image_width) {
  for (int v = 0; v < pos.height(); ++v) {
    for (int u = 0; u < pos.width(); ++u) {
      if (!pos.valid(v, u)) continue;
      const float* p = pos.point(v, u);
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
        fail(ErrorCategory::geometry_mismatch, "position map has non-finite coordinates");
      }
      const long x = std::lround(p[0]);
      const long y = std::lround(p[1]);
      if (x < 0 || y < 0 || x >= image_width || y >= image_height) {
        fail(ErrorCategory::geometry_mismatch,
             "position map XY outside image bounds " + std::to_string(image_width) + "x" +
                 std::to_string(image_height),
             "texel (" + std::to_string(u) + "," + std::to_string(v) + ") -> (" +
                 std::to_string(x) + "," + std::to_string(y) + ")");
      }
    }
  }
}

std::vector<std::uint8_t> encode_uvpm(const PositionMap& pos) {
  const std::size_t n = static_cast<std::size_t>(pos.width()) * pos.height();
  std::vector<std::uint8_t> out(4 + 8 + n * 12 + n);
  std::memcpy(out.data(), "UVPM", 4);
  const auto w = static_cast<std::uint32_t>(pos.width());
  const auto h = static_cast<std::uint32_t>(pos.height());
  std::memcpy(out.data() + 4, &w, 4);
  std::memcpy(out.data() + 8, &h, 4);
  std::uint8_t* planes = out.data() + 12;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const float value = pos.xyz()[i * 3 + c];
      std::memcpy(planes + (c * n + i) * 4, &value, 4);
    }
  }
  std::uint8_t* mask = planes + n * 12;
  for (std::size_t i = 0; i < n; ++i) mask[i] = pos.valid_mask()[i] ? 1 : 0;
  return out;
}

PositionMap decode_uvpm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "UVPM", 4) != 0) {
    fail(ErrorCategory::io, "not a UVPM position map");
  }
  std::uint32_t w;
  std::uint32_t h;
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  if (w == 0 || h == 0 || w > 16384 || h > 16384) fail(ErrorCategory::io, "UVPM: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 12 + n * 13) fail(ErrorCategory::io, "UVPM: size does not match header");
  PositionMap pos(static_cast<int>(h), static_cast<int>(w));
  const std::uint8_t* planes = bytes.data() + 12;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(&pos.xyz()[i * 3 + c], planes + (c * n + i) * 4, 4);
    }
  }
  const std::uint8_t* mask = planes + n * 12;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] > 1) fail(ErrorCategory::io, "UVPM: validity byte must be 0 or 1");
    pos.valid_mask()[i] = mask[i];
  }
  return pos;
}

void write_uvpm(const std::filesystem::path& path, const PositionMap& pos) {
  io::write_file(path, encode_uvpm(pos));
}

PositionMap read_uvpm(const std::filesystem::path& path) { return decode_uvpm(io::read_file(path)); }

}  // namespace uvmakeup::uvgeom
