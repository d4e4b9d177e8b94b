#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace modelseg {

// Row-major multi-channel raster of doubles. Element (u, v, c) lives at
// ((v * width + u) * channels + c); u runs left to right, v top to bottom.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int width, int height, int channels = 1, double fill = 0.0);

  // Reshapes and fills in place, keeping the allocation when it is large
  // enough.
  void assign(int width, int height, int channels, double fill);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int u, int v, int c = 0) {
    return data_[index(u, v, c)];
  }
  double at(int u, int v, int c = 0) const { return data_[index(u, v, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ImageGrid& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool all_finite() const;

  // Copy of a single channel as a 1-channel grid.
  ImageGrid channel(int c) const;

  bool operator==(const ImageGrid& other) const = default;

 private:
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

// Binary mask; every element is 0 or 1.
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(int width, int height, bool fill = false);

  // Reshapes and fills in place, keeping the allocation when possible.
  void assign(int width, int height, bool fill);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int u, int v) const { return bits_[index(u, v)] != 0; }
  void set(int u, int v, bool value) {
    bits_[index(u, v)] = value ? 1 : 0;
  }
  // Out-of-range reads return `outside`.
  bool at_or(int u, int v, bool outside) const {
    if (u < 0 || v < 0 || u >= width_ || v >= height_) return outside;
    return at(u, v);
  }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool same_shape(const BinaryGrid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  BinaryGrid operator~() const;
  BinaryGrid operator&(const BinaryGrid& other) const;
  BinaryGrid operator|(const BinaryGrid& other) const;
  bool operator==(const BinaryGrid& other) const = default;

  // True when every set pixel of *this is also set in `other`.
  bool subset_of(const BinaryGrid& other) const;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Integer label raster (part ids, 0 = background).
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(int width, int height, std::uint16_t fill = 0)
      : width_(width),
        height_(height),
        labels_(static_cast<std::size_t>(width) * height, fill) {}

  // Reshapes and fills in place, keeping the allocation when possible.
  void assign(int width, int height, std::uint16_t fill) {
    width_ = width;
    height_ = height;
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint16_t at(int u, int v) const {
    return labels_[static_cast<std::size_t>(v) * width_ + u];
  }
  std::uint16_t& at(int u, int v) {
    return labels_[static_cast<std::size_t>(v) * width_ + u];
  }
  std::span<const std::uint16_t> labels() const { return labels_; }
  std::span<std::uint16_t> labels() { return labels_; }
  bool operator==(const LabelGrid& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint16_t> labels_;
};

}  // namespace modelseg
