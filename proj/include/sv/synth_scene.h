#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sv/correspondence.h"
#include "sv/geometry.h"
#include "sv/image.h"

namespace sv {

enum class TextureKind { kChecker, kGradient, kPlaid };

// Procedural surface color evaluated at world-scaled surface coordinates,
// fully deterministic.
struct Texture {
  TextureKind kind = TextureKind::kChecker;
  double scale = 1.0;  // spatial frequency in 1 / world units
  Eigen::Vector3d color_a = Eigen::Vector3d(0.9, 0.9, 0.9);
  Eigen::Vector3d color_b = Eigen::Vector3d(0.1, 0.1, 0.1);
};

Eigen::Vector3d texture_color(const Texture& texture, double u, double v);

enum class PrimitiveKind { kRect, kSphere, kBox };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kRect;
  int id = 0;
  Texture texture;

  // Rect: center + a * u_axis + b * v_axis, |a| <= half_u, |b| <= half_v,
  // with u_axis, v_axis orthonormal.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d v_axis = Eigen::Vector3d::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;

  // Sphere.
  double radius = 1.0;

  // Axis-aligned box.
  Eigen::Vector3d half_size = Eigen::Vector3d::Ones();
};

struct SyntheticScene {
  std::string name;
  std::vector<Primitive> primitives;
  CameraRig rig;
  uint64_t seed = 0;
};

struct HitRecord {
  double t = 0.0;               // ray parameter (world distance, unit dir)
  int primitive_id = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector2d surface_uv = Eigen::Vector2d::Zero();  // world-scaled
};

// Nearest intersection along the ray (t > 1e-9); false on miss.
bool intersect_scene(const SyntheticScene& scene, const Ray& ray,
                     HitRecord* hit);

// Analytic per-pixel camera-frame depth of the nearest surface; misses stay
// invalid. The CameraView overloads render arbitrary cameras (virtual poses).
DepthMap render_depth(const SyntheticScene& scene, const CameraView& cam);
DepthMap render_depth(const SyntheticScene& scene, int view_id);

Image render_image(const SyntheticScene& scene, const CameraView& cam);
Image render_image(const SyntheticScene& scene, int view_id);

// Pixels whose nearest hit belongs to the given primitive.
Mask render_primitive_mask(const SyntheticScene& scene, const CameraView& cam,
                           int primitive_id);
Mask render_primitive_mask(const SyntheticScene& scene, int view_id,
                           int primitive_id);

// True when the world point is inside the view frustum and not occluded
// (re-intersection distance within 1e-6 relative).
bool point_visible(const SyntheticScene& scene, const CameraView& cam,
                   const Eigen::Vector3d& point);

struct NoiseSpec {
  double match_sigma = 0.0;       // Gaussian pixel jitter on both sides
  double outlier_fraction = 0.0;  // fraction of matches replaced by noise
  double depth_noise_sigma = 0.0; // relative sigma for perturb_depth
};

// Matches plus construction-time ground truth for oracle checks.
struct LabeledMatches {
  MatchSet matches;
  std::vector<uint8_t> is_outlier;
  std::vector<double> gt_depth_i;  // camera-frame z in view_i (pre-noise)
  std::vector<double> gt_depth_j;
};

// Samples `count` surface points visible in both views, projects them into
// each, then injects jitter and exactly round(outlier_fraction * count)
// uniform-random outliers on the view_j side. Deterministic under the seed.
// Throws NoOverlap when no co-visible surface point can be found.
LabeledMatches sample_matches(const SyntheticScene& scene, int view_i,
                              int view_j, int count, const NoiseSpec& noise,
                              uint64_t seed);

// Multiplicative relative Gaussian noise on valid pixels.
DepthMap perturb_depth(const DepthMap& depth, double relative_sigma,
                       uint64_t seed);

// Named standard scenes: "plane3view" (textured fronto-parallel plane, three
// pure-translation cameras), "occluder-square" (near square over a far
// backdrop, three cameras), "sphere-ring-8" (textured sphere inside a sky
// sphere, eight inward-looking ring cameras).
// Throws ConfigOutOfRange for unknown names.
SyntheticScene make_preset(const std::string& name, uint64_t seed);

}  // namespace sv
