#include "modelseg/image.hpp"

#include <algorithm>
#include <cmath>

#include "modelseg/errors.hpp"

namespace modelseg {

ImageGrid::ImageGrid(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 1) {
    throw ArgumentError("ImageGrid: invalid dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void ImageGrid::assign(int width, int height, int channels, double fill) {
  if (width < 0 || height < 0 || channels < 1) {
    throw ArgumentError("ImageGrid: invalid dimensions");
  }
  width_ = width;
  height_ = height;
  channels_ = channels;
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

bool ImageGrid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

ImageGrid ImageGrid::channel(int c) const {
  if (c < 0 || c >= channels_) throw ArgumentError("ImageGrid: bad channel");
  ImageGrid out(width_, height_, 1);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = data_[i * channels_ + c];
  }
  return out;
}

BinaryGrid::BinaryGrid(int width, int height, bool fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw ArgumentError("BinaryGrid: invalid dimensions");
  }
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

void BinaryGrid::assign(int width, int height, bool fill) {
  if (width < 0 || height < 0) {
    throw ArgumentError("BinaryGrid: invalid dimensions");
  }
  width_ = width;
  height_ = height;
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryGrid BinaryGrid::operator~() const {
  BinaryGrid out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

BinaryGrid BinaryGrid::operator&(const BinaryGrid& other) const {
  if (!same_shape(other)) throw ArgumentError("BinaryGrid: shape mismatch");
  BinaryGrid out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    out.bits_[i] = bits_[i] & other.bits_[i];
  }
  return out;
}

BinaryGrid BinaryGrid::operator|(const BinaryGrid& other) const {
  if (!same_shape(other)) throw ArgumentError("BinaryGrid: shape mismatch");
  BinaryGrid out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    out.bits_[i] = bits_[i] | other.bits_[i];
  }
  return out;
}

bool BinaryGrid::subset_of(const BinaryGrid& other) const {
  if (!same_shape(other)) throw ArgumentError("BinaryGrid: shape mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

}  // namespace modelseg
