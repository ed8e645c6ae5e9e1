#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vesselsynth/errors.hpp"

namespace vesselsynth {

/// Row-major single-channel raster. x is the column, y the row (y grows down).
template <typename T>
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image2D() = default;
  Image2D(int w, int h, T fill = T{}) : width(w), height(h) {
    if (w < 0 || h < 0) throw ShapeError("image dimensions must be nonnegative");
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  T& operator()(int x, int y) { return pixels[index(x, y)]; }
  const T& operator()(int x, int y) const { return pixels[index(x, y)]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Image2D<U>& other) const {
    return width == other.width && height == other.height;
  }

  friend bool operator==(const Image2D&, const Image2D&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
};

/// Grayscale intensities, nominally in [0, 1].
using GrayImage = Image2D<float>;
/// Binary mask; 0 or 1 per pixel.
using Mask = Image2D<std::uint8_t>;

/// Three-channel image with interleaved RGB values in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float* at(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const float* at(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

/// Center crop to `w` x `h`. The offset is (size - target) / 2 on each axis.
template <typename T>
Image2D<T> center_crop(const Image2D<T>& src, int w, int h) {
  if (w > src.width || h > src.height || w < 0 || h < 0)
    throw ShapeError("center_crop: target larger than source");
  const int ox = (src.width - w) / 2;
  const int oy = (src.height - h) / 2;
  Image2D<T> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = src(x + ox, y + oy);
  return out;
}

}  // namespace vesselsynth
