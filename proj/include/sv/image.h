#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sv/error.h"

namespace sv {

// Dense row-major single-channel grid.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T())
      : width(w), height(h),
        data(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  T& at(int x, int y) {
    return data[static_cast<size_t>(y) * width + x];
  }
  const T& at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  size_t size() const { return data.size(); }
};

using Mask = Grid<uint8_t>;      // 0 / 1
using FloatMap = Grid<float>;    // edge magnitudes, gray images
using IndexMap = Grid<int>;      // slice / component labels

// Interleaved RGB float image with intensities in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 floats per pixel

  Image() = default;
  Image(int w, int h, float fill = 0.f)
      : width(w), height(h),
        data(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, fill) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  float& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  const float& at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// Per-pixel depth with an explicit validity mask. Valid pixels hold finite
// positive camera-frame depths; the stored value of invalid pixels is 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h),
        values(static_cast<size_t>(w) * static_cast<size_t>(h), 0.f),
        valid(static_cast<size_t>(w) * static_cast<size_t>(h), 0) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  size_t index(int x, int y) const {
    return static_cast<size_t>(y) * width + x;
  }
  float value(int x, int y) const { return values[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  void set(int x, int y, float depth) {
    values[index(x, y)] = depth;
    valid[index(x, y)] = 1;
  }
  void invalidate(int x, int y) {
    values[index(x, y)] = 0.f;
    valid[index(x, y)] = 0;
  }
  size_t valid_count() const {
    size_t n = 0;
    for (uint8_t v : valid) n += (v != 0);
    return n;
  }
};

// Throws DimensionMismatch unless both sizes agree.
void require_same_size(int wa, int ha, int wb, int hb);

// Bilinear sample of an RGB image at continuous pixel coordinates; pixel
// (0,0) is the center of the top-left pixel. Returns false outside
// [0, w-1] x [0, h-1].
bool bilinear_rgb(const Image& image, double x, double y, float rgb[3]);

// Bilinear sample of a depth map; false when out of bounds or when any
// contributing corner pixel is invalid.
bool bilinear_depth(const DepthMap& depth, double x, double y, double* out);

// Luma conversion (Rec. 601 weights) used by SSIM and edge metrics.
FloatMap to_gray(const Image& image);

}  // namespace sv
