#ifndef SV_VIEW_SYNTH_H_
#define SV_VIEW_SYNTH_H_

#include <cstdint>
#include <utility>
#include <vector>

#include "sv/geometry.h"
#include "sv/image.h"

namespace sv {

// Knobs for virtual-view synthesis.
struct WarpConfig {
  int fill_radius = 16;  // max hole-filling ring radius, pixels (0 = no fill)
  double w_rot = 1.0;    // rotation weight in pose scoring, per radian
  int k = 2;             // number of sources fused per virtual view
};

// One calibrated source: an RGB image with its (aligned) dense depth.
struct SourceView {
  CameraView cam;
  Image image;
  DepthMap depth;
};

// Attribution entry: which source contributed, and how close its pose was.
struct PoseScore {
  int source_id = -1;
  double score = 0.0;
};

// A rendered virtual view. `mask` marks pixels whose color and depth are
// trustworthy; it is always a subset of depth.valid.
struct VirtualView {
  CameraView cam;
  Image image;
  DepthMap depth;
  Mask mask;
  std::vector<PoseScore> sources;  // best first
};

// Forward depth-warp result: hole-filled depth plus the pre-fill footprint.
struct ForwardWarp {
  DepthMap depth;
  Mask coverage;
};

// Splats every valid source depth pixel into the virtual camera (bilinear
// 4-neighbor footprint, z-buffer nearest-wins) and fills holes within
// fill_radius. coverage records the pixels hit before filling.
ForwardWarp warp_depth_forward(const DepthMap& src_depth,
                               const CameraView& src_cam,
                               const CameraView& vir_cam, int fill_radius);

// Fills each invalid pixel from the nearest ring (Chebyshev radius 1..
// max_radius) of originally-valid pixels, weighted by inverse Euclidean
// distance. Valid pixels pass through untouched; pixels with no valid
// neighbor within max_radius stay invalid.
DepthMap fill_holes(const DepthMap& depth, int max_radius);

// For each valid virtual-depth pixel, back-projects into world space,
// projects into the source view, and samples the source image bilinearly.
// The mask is false where the virtual depth is invalid, the point falls
// behind the source camera, or the lookup leaves the source frame.
std::pair<Image, Mask> warp_image_backward(const Image& src_image,
                                           const CameraView& src_cam,
                                           const CameraView& vir_cam,
                                           const DepthMap& vir_depth);

// 1 / (1 + |t_rel| + w_rot * theta_rel): 1 iff the poses coincide, strictly
// decreasing in translational distance and rotation angle.
double pose_score(const CameraPose& src, const CameraPose& vir, double w_rot);

// Fuses virtual views rendered at one shared pose: views are ranked by
// descending primary score (ties by ascending source id), the best is the
// base, and lower-ranked views fill in only where every higher-ranked mask
// is false. Output mask is the union over the top k. Throws PoseMismatch
// if the views disagree about pose or intrinsics beyond 1e-9.
VirtualView fuse_topk(const std::vector<VirtualView>& views, int k);

// Samples poses between random training-view pairs: camera centers are
// interpolated linearly and rotations by quaternion slerp, with the
// interpolation parameter uniform in [0.1, 0.9]. Deterministic per seed.
std::vector<CameraPose> generate_virtual_poses(const CameraRig& rig, int count,
                                               uint64_t seed);

// Full bidirectional synthesis: scores all sources against vir_cam, warps the
// top k independently (depth forward with fill, then image backward), and
// fuses them. Requires 1 <= k <= sources.size().
VirtualView synthesize(const std::vector<SourceView>& sources,
                       const CameraView& vir_cam, const WarpConfig& config);

// Plain forward splat of color and depth (no hole filling, no backward
// lookup). Kept as the quality baseline that bidirectional warping is
// measured against.
VirtualView warp_forward_baseline(const SourceView& src,
                                  const CameraView& vir_cam,
                                  const WarpConfig& config);

}  // namespace sv

#endif  // SV_VIEW_SYNTH_H_
