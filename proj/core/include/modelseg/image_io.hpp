#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "modelseg/image.hpp"

namespace modelseg {

// 8-bit interleaved RGB raster used for overlays and debug renders.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

  Rgb8Image() = default;
  Rgb8Image(int w, int h)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  void set(int u, int v, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
};

// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Reads an 8- or 16-bit PNG into [0,1] doubles. Gray -> 1 channel,
// RGB/RGBA/palette -> 3 channels (alpha dropped).
ImageGrid read_png(const std::filesystem::path& path);

// Writes a 1- or 3-channel grid as 8-bit PNG; values are clamped to [0,1]
// and mapped to round(255 x).
void write_png(const std::filesystem::path& path, const ImageGrid& image);
void write_png(const std::filesystem::path& path, const Rgb8Image& image);

// Masks are stored as 0/255 grayscale; reading thresholds at 128.
void write_mask_png(const std::filesystem::path& path, const BinaryGrid& mask);
BinaryGrid read_mask_png(const std::filesystem::path& path);

// 16-bit grayscale label image.
void write_label_png(const std::filesystem::path& path, const LabelGrid& labels);
LabelGrid read_label_png(const std::filesystem::path& path);

// Normal buffer debug image: channel value round(127.5 (n + 1)).
Rgb8Image encode_normals(const ImageGrid& normals);

// Raw grid: 16-byte header ("MSGR", u32 width, u32 height, u32 channels,
// all little-endian) followed by little-endian float64 samples.
std::string encode_raw_grid(const ImageGrid& grid);
ImageGrid decode_raw_grid(std::string_view bytes);
void write_raw_grid(const std::filesystem::path& path, const ImageGrid& grid);
ImageGrid read_raw_grid(const std::filesystem::path& path);

}  // namespace modelseg
