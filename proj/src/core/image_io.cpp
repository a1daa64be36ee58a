#include "uvmakeup/core/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace uvmakeup::io {
namespace {

struct WriteBuffer {
  std::vector<std::uint8_t> bytes;
};

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* buffer = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buffer->bytes.insert(buffer->bytes.end(), data, data + length);
}

void flush_callback(png_structp) {}

struct ReadBuffer {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* buffer = static_cast<ReadBuffer*>(png_get_io_ptr(png));
  if (buffer->offset + length > buffer->bytes->size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(data, buffer->bytes->data() + buffer->offset, length);
  buffer->offset += length;
}

void error_callback(png_structp, png_const_charp message) {
  throw Error(ErrorCategory::io, std::string("png: ") + message);
}

void warning_callback(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode(int width, int height, int color_type, int channels,
                                 const std::uint8_t* pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                            warning_callback);
  if (png == nullptr) fail(ErrorCategory::io, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  WriteBuffer buffer;
  try {
    png_set_write_fn(png, &buffer, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y) {
      png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return std::move(buffer.bytes);
}

/// Decodes to 8-bit RGBA regardless of the stored format.
Rgba8 decode(const std::vector<std::uint8_t>& bytes, bool* had_alpha) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(ErrorCategory::io, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                           warning_callback);
  if (png == nullptr) fail(ErrorCategory::io, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  Rgba8 out;
  try {
    ReadBuffer buffer{&bytes, 0};
    png_set_read_fn(png, &buffer, read_callback);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (had_alpha != nullptr) {
      *had_alpha = (color_type & PNG_COLOR_MASK_ALPHA) != 0 ||
                   png_get_valid(png, info, PNG_INFO_tRNS) != 0;
    }
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) {
      rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * out.width * 4;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(const RgbRaster& image) {
  std::vector<std::uint8_t> pixels(image.values().size());
  const auto values = image.values();
  for (std::size_t i = 0; i < values.size(); ++i) pixels[i] = to_u8(values[i]);
  return encode(image.width(), image.height(), PNG_COLOR_TYPE_RGB, 3, pixels.data());
}

std::vector<std::uint8_t> encode_png_gray(const Plane& plane) {
  std::vector<std::uint8_t> pixels(plane.values().size());
  const auto values = plane.values();
  for (std::size_t i = 0; i < values.size(); ++i) pixels[i] = to_u8(values[i]);
  return encode(plane.width(), plane.height(), PNG_COLOR_TYPE_GRAY, 1, pixels.data());
}

std::vector<std::uint8_t> encode_png_rgba(const Rgba8& image) {
  return encode(image.width, image.height, PNG_COLOR_TYPE_RGBA, 4, image.pixels.data());
}

Image decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  const Rgba8 rgba = decode(bytes, nullptr);
  Image out(rgba.height, rgba.width);
  auto values = out.values();
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) values[p * 3 + c] = rgba.pixels[p * 4 + c] / 255.0f;
  }
  return out;
}

Plane decode_png_gray(const std::vector<std::uint8_t>& bytes) {
  const Rgba8 rgba = decode(bytes, nullptr);
  Plane out(rgba.height, rgba.width);
  auto values = out.values();
  for (std::size_t p = 0; p < out.pixel_count(); ++p) values[p] = rgba.pixels[p * 4] / 255.0f;
  return out;
}

Rgba8 decode_png_rgba(const std::vector<std::uint8_t>& bytes) { return decode(bytes, nullptr); }

bool png_has_alpha(const std::vector<std::uint8_t>& bytes) {
  bool alpha = false;
  decode(bytes, &alpha);
  return alpha;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::io, "short write to " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_png(const std::filesystem::path& path, const RgbRaster& image) {
  write_file(path, encode_png_rgb(image));
}
void write_png(const std::filesystem::path& path, const Plane& plane) {
  write_file(path, encode_png_gray(plane));
}
void write_png(const std::filesystem::path& path, const Rgba8& image) {
  write_file(path, encode_png_rgba(image));
}
Image read_png(const std::filesystem::path& path) { return decode_png_rgb(read_file(path)); }
Plane read_png_gray(const std::filesystem::path& path) { return decode_png_gray(read_file(path)); }
Rgba8 read_png_rgba(const std::filesystem::path& path) { return decode_png_rgba(read_file(path)); }

}  // namespace uvmakeup::io
