#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace lunarforge {

// Row-major 2D buffer; row 0 is the top (image) or north (DEM) row.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) {
    assert(row < height_ && col < width_);
    return data_[row * width_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col) const {
    assert(row < height_ && col < width_);
    return data_[row * width_ + col];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* row(std::size_t r) { return data_.data() + r * width_; }
  const T* row(std::size_t r) const { return data_.data() + r * width_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using RasterD = Raster<double>;
using Mask = Raster<unsigned char>;

}  // namespace lunarforge
