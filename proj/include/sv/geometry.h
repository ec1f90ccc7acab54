#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sv/error.h"

namespace sv {

// Camera-frame depths at or below this value are treated as behind the
// camera and raise NonPositiveDepth.
inline constexpr double kMinDepth = 1e-9;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// r(z) = origin + z * direction, with direction unit length (world frame).
struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

struct CameraView {
  int view_id = -1;
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

struct CameraRig {
  std::vector<CameraView> views;

  const CameraView& view(int view_id) const;
  int index_of(int view_id) const;  // -1 when absent
};

struct Projection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
};

// Throws ConfigOutOfRange when an invariant is violated.
void validate(const CameraIntrinsics& intrinsics);
void validate(const CameraPose& pose);
void validate(const CameraRig& rig);

// Pinhole projection of a world point. Pixel (0,0) is the center of the
// top-left pixel. Throws NonPositiveDepth when the camera-frame z <= kMinDepth.
Projection project(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   const Eigen::Vector3d& point_world);
Projection project(const CameraView& view, const Eigen::Vector3d& point_world);

// Non-throwing variant for optimizer hot loops. Returns false (out untouched)
// when the point is behind the camera.
bool try_project(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                 const Eigen::Vector3d& point_world, Projection* out);

// World point at camera-frame depth z along the pixel's viewing ray.
// Throws NonPositiveDepth when z <= 0.
Eigen::Vector3d back_project(const CameraIntrinsics& intrinsics,
                             const CameraPose& pose,
                             const Eigen::Vector2d& pixel, double z);
Eigen::Vector3d back_project(const CameraView& view,
                             const Eigen::Vector2d& pixel, double z);

// Optical center in world coordinates: -R^T t.
Eigen::Vector3d camera_center(const CameraPose& pose);

// World-frame direction g with unit camera-frame z, so that
// back_project(pixel, z) = camera_center + z * g. This affine form is what
// the depth solver differentiates.
Eigen::Vector3d depth_direction(const CameraIntrinsics& intrinsics,
                                const CameraPose& pose,
                                const Eigen::Vector2d& pixel);

// Unit-direction viewing ray through a pixel.
Ray pixel_ray(const CameraIntrinsics& intrinsics, const CameraPose& pose,
              const Eigen::Vector2d& pixel);

// Rigid transform taking `from`-camera coordinates to `to`-camera
// coordinates; relative_pose(a, a) is the identity.
CameraPose relative_pose(const CameraPose& from, const CameraPose& to);

// Applies `inner` first, then `outer`.
CameraPose compose(const CameraPose& outer, const CameraPose& inner);

CameraPose inverse(const CameraPose& pose);

// Geodesic rotation angle in radians, in [0, pi].
double rotation_angle(const Eigen::Matrix3d& rotation);

// Pose dissimilarity ||t_rel|| + w_rot * angle(R_rel); the ranking metric
// behind pose scoring and bridge-partner selection.
double pose_distance(const CameraPose& a, const CameraPose& b, double w_rot);

// World-to-camera pose for a camera at `eye` looking toward `target`.
// `up` is the world direction that maps to image up (camera -y). The camera
// frame is x-right, y-down, z-forward.
CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                   const Eigen::Vector3d& up);

// Largest pairwise distance between camera centers; 1.0 when the rig is
// degenerate (fewer than two distinct centers). Used to scale optimizer
// steps and depth bounds.
double scene_diameter(const CameraRig& rig);

}  // namespace sv
