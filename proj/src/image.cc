#include "sv/image.h"

#include <algorithm>
#include <string>

namespace sv {

void require_same_size(int wa, int ha, int wb, int hb) {
  if (wa != wb || ha != hb) {
    fail("DimensionMismatch",
         "size " + std::to_string(wa) + "x" + std::to_string(ha) +
             " vs " + std::to_string(wb) + "x" + std::to_string(hb));
  }
}

namespace {

struct BilinearOffsets {
  int x0, y0, x1, y1;
  double fx, fy;
};

bool bilinear_setup(int width, int height, double x, double y,
                    BilinearOffsets* b) {
  if (!(x >= 0.0) || !(y >= 0.0) || !(x <= width - 1.0) ||
      !(y <= height - 1.0)) {
    return false;
  }
  b->x0 = static_cast<int>(std::floor(x));
  b->y0 = static_cast<int>(std::floor(y));
  b->fx = x - b->x0;
  b->fy = y - b->y0;
  b->x1 = std::min(b->x0 + 1, width - 1);
  b->y1 = std::min(b->y0 + 1, height - 1);
  return true;
}

}  // namespace

bool bilinear_rgb(const Image& image, double x, double y, float rgb[3]) {
  BilinearOffsets b;
  if (!bilinear_setup(image.width, image.height, x, y, &b)) return false;
  const double w00 = (1.0 - b.fx) * (1.0 - b.fy);
  const double w10 = b.fx * (1.0 - b.fy);
  const double w01 = (1.0 - b.fx) * b.fy;
  const double w11 = b.fx * b.fy;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<float>(w00 * image.at(b.x0, b.y0, c) +
                                w10 * image.at(b.x1, b.y0, c) +
                                w01 * image.at(b.x0, b.y1, c) +
                                w11 * image.at(b.x1, b.y1, c));
  }
  return true;
}

bool bilinear_depth(const DepthMap& depth, double x, double y, double* out) {
  BilinearOffsets b;
  if (!bilinear_setup(depth.width, depth.height, x, y, &b)) return false;
  if (!depth.is_valid(b.x0, b.y0) || !depth.is_valid(b.x1, b.y0) ||
      !depth.is_valid(b.x0, b.y1) || !depth.is_valid(b.x1, b.y1)) {
    return false;
  }
  const double w00 = (1.0 - b.fx) * (1.0 - b.fy);
  const double w10 = b.fx * (1.0 - b.fy);
  const double w01 = (1.0 - b.fx) * b.fy;
  const double w11 = b.fx * b.fy;
  *out = w00 * depth.value(b.x0, b.y0) + w10 * depth.value(b.x1, b.y0) +
         w01 * depth.value(b.x0, b.y1) + w11 * depth.value(b.x1, b.y1);
  return true;
}

FloatMap to_gray(const Image& image) {
  FloatMap gray(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      gray.at(x, y) = 0.299f * image.at(x, y, 0) + 0.587f * image.at(x, y, 1) +
                      0.114f * image.at(x, y, 2);
    }
  }
  return gray;
}

}  // namespace sv
