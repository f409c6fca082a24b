#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "orthosplat/error.hpp"

namespace orthosplat {

/// Row-major interleaved raster. Row 0 is the top of the image.
template <typename T>
class Image {
public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || channels < 1)
      throw InvalidInput("image dimensions must be non-negative with at least one channel");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T &at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T &at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<T> &data() { return data_; }
  const std::vector<T> &data() const { return data_; }

  bool same_shape(const Image &other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image &, const Image &) = default;

private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ImageF64 = Image<double>;
using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;

} // namespace orthosplat
