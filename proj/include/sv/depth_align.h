#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sv/depth_solver.h"
#include "sv/image.h"

namespace sv {

// Sparse trusted depths (solved camera-frame z) at sub-pixel locations of one
// view, with their acceptance mask.
struct SparseDepthSamples {
  std::vector<Eigen::Vector2d> pixels;
  std::vector<double> depths;
  std::vector<uint8_t> mask;

  size_t size() const { return pixels.size(); }
};

struct AffineDepthFit {
  double scale = 1.0;
  double offset = 0.0;
  std::vector<uint8_t> inlier_mask;  // parallel to the sample arrays
  double rms_residual = 0.0;
};

// Recovers (scale, offset) mapping the scale-agnostic mono depth onto the
// sparse solved depths by trimmed least squares: `rounds` closed-form 2x2
// fits, dropping the worst trim_fraction of residuals between rounds. Mono
// is sampled bilinearly at the sample pixels. Throws InsufficientSamples
// (< 2 usable samples) and DegenerateFit (constant mono values).
AffineDepthFit fit_scale_offset(const DepthMap& mono,
                                const SparseDepthSamples& samples,
                                int rounds = 3, double trim_fraction = 0.1);

// Per-pixel scale * d + offset; results <= 0 are marked invalid.
DepthMap apply_affine(const DepthMap& mono, const AffineDepthFit& fit);

// Gathers all solved depths of one view from a depth field (both pair sides),
// with the reprojection-consistency mask.
SparseDepthSamples collect_view_samples(const DepthField& field, int view_id);

}  // namespace sv
