#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"

namespace microgen::nn {

struct Shape4 {
  std::size_t channels = 0;
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t spatial() const noexcept { return depth * height * width; }
  std::size_t size() const noexcept { return channels * spatial(); }
  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(depth) + "x" +
           std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Dense channels x depth x height x width array, width fastest.
///
/// Voxel volumes map onto it as (phase, z, y, x), so the spatial layout is the
/// same x-fastest order used by VoxelGrid labels.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(std::size_t c, std::size_t d, std::size_t h, std::size_t w, T fill = T{})
      : Tensor4(Shape4{c, d, h, w}, fill) {}

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t depth() const noexcept { return shape_.depth; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t spatial_size() const noexcept { return shape_.spatial(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return ((c * shape_.depth + z) * shape_.height + y) * shape_.width + x;
  }
  T& operator()(std::size_t c, std::size_t z, std::size_t y, std::size_t x) noexcept {
    return data_[index(c, z, y, x)];
  }
  const T& operator()(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return data_[index(c, z, y, x)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::span<T> channel(std::size_t c) noexcept {
    return std::span<T>(data_).subspan(c * spatial_size(), spatial_size());
  }
  std::span<const T> channel(std::size_t c) const noexcept {
    return std::span<const T>(data_).subspan(c * spatial_size(), spatial_size());
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

template <typename T>
using Batch = std::vector<Tensor4<T>>;

template <typename T>
T dot(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("dot: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  T acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Circular tiling of the spatial dims; used for periodic-generation checks.
template <typename T>
Tensor4<T> tile_spatial(const Tensor4<T>& t, std::size_t rz, std::size_t ry, std::size_t rx) {
  Tensor4<T> out(t.channels(), t.depth() * rz, t.height() * ry, t.width() * rx);
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t z = 0; z < out.depth(); ++z)
      for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x)
          out(c, z, y, x) = t(c, z % t.depth(), y % t.height(), x % t.width());
  return out;
}

}  // namespace microgen::nn
