#include "modelseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "modelseg/errors.hpp"

namespace modelseg {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("rename failed for " + path.string() + ": " + ec.message());
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;  // after transforms: 1 (gray) or 3 (rgb)
  int bit_depth = 8;
  std::vector<std::uint8_t> rows;  // tightly packed, big-endian for 16-bit
};

struct MemoryReader {
  const std::string* data;
  std::size_t offset;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + length > reader->data->size()) {
    png_error(png, "truncated PNG");
  }
  std::memcpy(out, reader->data->data() + reader->offset, length);
  reader->offset += length;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* buffer = static_cast<std::string*>(png_get_io_ptr(png));
  buffer->append(reinterpret_cast<const char*>(data), length);
}

void flush_noop(png_structp) {}

bool decode_png(const std::string& bytes, DecodedPng& out, std::string& error) {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    error = "not a PNG file";
    return false;
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  MemoryReader reader{&bytes, 0};
  std::vector<png_bytep> row_pointers;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "libpng decode error";
    return false;
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.rows.resize(rowbytes * out.height);
  row_pointers.resize(out.height);
  for (int y = 0; y < out.height; ++y) {
    row_pointers[y] = out.rows.data() + rowbytes * y;
  }
  png_read_image(png, row_pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png(int width, int height, int color_type, int bit_depth,
                const std::vector<std::uint8_t>& rows, std::string& out,
                std::string& error) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  std::vector<png_bytep> row_pointers(height);
  const std::size_t rowbytes = rows.size() / std::max(height, 1);
  for (int y = 0; y < height; ++y) {
    row_pointers[y] = const_cast<png_bytep>(rows.data() + rowbytes * y);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    error = "libpng encode error";
    return false;
  }
  png_set_write_fn(png, &out, write_to_memory, flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_pointers.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

DecodedPng load_png(const fs::path& path) {
  const std::string bytes = read_file(path);
  DecodedPng decoded;
  std::string error;
  if (!decode_png(bytes, decoded, error)) {
    throw Error(path.string() + ": " + error);
  }
  return decoded;
}

void save_png(const fs::path& path, int width, int height, int color_type,
              int bit_depth, const std::vector<std::uint8_t>& rows) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError("write_png: empty image " + path.string());
  }
  std::string encoded;
  std::string error;
  if (!encode_png(width, height, color_type, bit_depth, rows, encoded, error)) {
    throw Error(path.string() + ": " + error);
  }
  write_file_atomic(path, encoded);
}

std::uint8_t to_byte(double x) {
  const double clamped = std::clamp(x, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

double sample(const DecodedPng& png, std::size_t index) {
  if (png.bit_depth == 16) {
    const unsigned hi = png.rows[2 * index];
    const unsigned lo = png.rows[2 * index + 1];
    return static_cast<double>((hi << 8) | lo) / 65535.0;
  }
  return static_cast<double>(png.rows[index]) / 255.0;
}

void put_le32(std::string& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
  }
}

std::uint32_t get_le32(std::string_view bytes, std::size_t offset) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(
                 static_cast<unsigned char>(bytes[offset + i]))
             << (8 * i);
  }
  return value;
}

constexpr char kRawMagic[4] = {'M', 'S', 'G', 'R'};

}  // namespace

ImageGrid read_png(const fs::path& path) {
  const DecodedPng png = load_png(path);
  const int channels = png.channels >= 3 ? 3 : 1;
  ImageGrid out(png.width, png.height, channels);
  for (int v = 0; v < png.height; ++v) {
    for (int u = 0; u < png.width; ++u) {
      const std::size_t base =
          (static_cast<std::size_t>(v) * png.width + u) * png.channels;
      for (int c = 0; c < channels; ++c) out.at(u, v, c) = sample(png, base + c);
    }
  }
  return out;
}

void write_png(const fs::path& path, const ImageGrid& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ArgumentError("write_png: only 1- or 3-channel grids are supported");
  }
  const auto src = image.data();
  std::vector<std::uint8_t> rows(src.size());
  std::transform(src.begin(), src.end(), rows.begin(), to_byte);
  save_png(path, image.width(), image.height(),
           image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8,
           rows);
}

void write_png(const fs::path& path, const Rgb8Image& image) {
  save_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8,
           image.pixels);
}

void write_mask_png(const fs::path& path, const BinaryGrid& mask) {
  std::vector<std::uint8_t> rows(mask.size());
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = bits[i] ? 255 : 0;
  save_png(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8, rows);
}

BinaryGrid read_mask_png(const fs::path& path) {
  const ImageGrid gray = read_png(path);
  BinaryGrid mask(gray.width(), gray.height());
  for (int v = 0; v < gray.height(); ++v) {
    for (int u = 0; u < gray.width(); ++u) {
      mask.set(u, v, gray.at(u, v, 0) >= 128.0 / 255.0);
    }
  }
  return mask;
}

void write_label_png(const fs::path& path, const LabelGrid& labels) {
  const auto src = labels.labels();
  std::vector<std::uint8_t> rows(src.size() * 2);
  for (std::size_t i = 0; i < src.size(); ++i) {
    rows[2 * i] = static_cast<std::uint8_t>(src[i] >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(src[i] & 0xffu);
  }
  save_png(path, labels.width(), labels.height(), PNG_COLOR_TYPE_GRAY, 16,
           rows);
}

LabelGrid read_label_png(const fs::path& path) {
  const DecodedPng png = load_png(path);
  if (png.channels != 1) throw Error(path.string() + ": label PNG must be gray");
  LabelGrid out(png.width, png.height);
  auto dst = out.labels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (png.bit_depth == 16) {
      dst[i] = static_cast<std::uint16_t>((png.rows[2 * i] << 8) | png.rows[2 * i + 1]);
    } else {
      dst[i] = png.rows[i];
    }
  }
  return out;
}

Rgb8Image encode_normals(const ImageGrid& normals) {
  if (normals.channels() != 3) {
    throw ArgumentError("encode_normals: expected a 3-channel grid");
  }
  Rgb8Image out(normals.width(), normals.height());
  const auto src = normals.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double n = std::clamp(src[i], -1.0, 1.0);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(127.5 * (n + 1.0)));
  }
  return out;
}

std::string encode_raw_grid(const ImageGrid& grid) {
  std::string out(kRawMagic, 4);
  put_le32(out, static_cast<std::uint32_t>(grid.width()));
  put_le32(out, static_cast<std::uint32_t>(grid.height()));
  put_le32(out, static_cast<std::uint32_t>(grid.channels()));
  out.reserve(out.size() + grid.size() * 8);
  for (double x : grid.data()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
  }
  return out;
}

ImageGrid decode_raw_grid(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kRawMagic, 4) != 0) {
    throw ParseError("raw grid: bad header", 1);
  }
  const auto w = get_le32(bytes, 4);
  const auto h = get_le32(bytes, 8);
  const auto c = get_le32(bytes, 12);
  const std::size_t count = static_cast<std::size_t>(w) * h * c;
  if (c == 0 || bytes.size() != 16 + count * 8) {
    throw ParseError("raw grid: size does not match header", 1);
  }
  ImageGrid grid(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  auto dst = grid.data();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes[16 + i * 8 + b]))
              << (8 * b);
    }
    std::memcpy(&dst[i], &bits, sizeof bits);
  }
  return grid;
}

void write_raw_grid(const fs::path& path, const ImageGrid& grid) {
  write_file_atomic(path, encode_raw_grid(grid));
}

ImageGrid read_raw_grid(const fs::path& path) {
  return decode_raw_grid(read_file(path));
}

}  // namespace modelseg
