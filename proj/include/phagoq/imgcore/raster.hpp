#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phagoq/error.hpp"

namespace phagoq {

// Dense row-major 2-D array.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("raster dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const auto& other) const { return width_ == other.width() && height_ == other.height(); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Signed floating field (Laplacian responses, gradients, costs).
using Field = Raster<float>;

enum class BitDepth : std::uint8_t { U8, U16 };

inline constexpr double kDefaultPixelPitchUm = 0.103;

// Grayscale frame with intensities in [0,1]. The origin bit depth is
// metadata only; all arithmetic uses the normalized floats.
class Frame : public Raster<float> {
 public:
  Frame() = default;
  Frame(int width, int height, float fill = 0.0f) : Raster<float>(width, height, fill) {}
  explicit Frame(Raster<float> r) : Raster<float>(std::move(r)) {}

  BitDepth bit_depth_origin = BitDepth::U16;
  int t_index = 0;
  double pixel_pitch_um = kDefaultPixelPitchUm;

  // Copies metadata but not pixels.
  Frame like(float fill = 0.0f) const {
    Frame f(width(), height(), fill);
    f.bit_depth_origin = bit_depth_origin;
    f.t_index = t_index;
    f.pixel_pitch_um = pixel_pitch_um;
    return f;
  }

  // Throws InvalidArgument if any pixel is non-finite or outside [0,1].
  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class Connectivity : std::uint8_t { Four, Eight };

// Integer component labels; 0 is background and every label in
// 1..max_label occurs at least once.
struct LabelMap {
  Raster<std::int32_t> labels;
  std::int32_t max_label = 0;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }
};

struct RegionFeatures {
  std::int32_t label = 0;
  std::int64_t area_px = 0;
  Point2 centroid;  // x = column mean, y = row mean
};

using BinaryMask = Raster<std::uint8_t>;

}  // namespace phagoq
