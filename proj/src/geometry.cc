#include "sv/geometry.h"

#include <algorithm>
#include <cmath>

namespace sv {

const CameraView& CameraRig::view(int view_id) const {
  const int idx = index_of(view_id);
  if (idx < 0) {
    fail("ViewMismatch", "rig has no view with id " + std::to_string(view_id));
  }
  return views[static_cast<size_t>(idx)];
}

int CameraRig::index_of(int view_id) const {
  for (size_t i = 0; i < views.size(); ++i) {
    if (views[i].view_id == view_id) return static_cast<int>(i);
  }
  return -1;
}

void validate(const CameraIntrinsics& intrinsics) {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    fail("ConfigOutOfRange", "focal lengths must be positive");
  }
  if (intrinsics.width <= 0 || intrinsics.height <= 0) {
    fail("ConfigOutOfRange", "image size must be positive");
  }
  if (intrinsics.cx < 0.0 || intrinsics.cx >= intrinsics.width ||
      intrinsics.cy < 0.0 || intrinsics.cy >= intrinsics.height) {
    fail("ConfigOutOfRange", "principal point must lie inside the image");
  }
}

void validate(const CameraPose& pose) {
  const Eigen::Matrix3d gram =
      pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > 1e-9) {
    fail("ConfigOutOfRange", "rotation is not orthonormal");
  }
  if (std::abs(pose.rotation.determinant() - 1.0) > 1e-9) {
    fail("ConfigOutOfRange", "rotation determinant is not +1");
  }
}

void validate(const CameraRig& rig) {
  for (size_t i = 0; i < rig.views.size(); ++i) {
    validate(rig.views[i].intrinsics);
    validate(rig.views[i].pose);
    for (size_t j = i + 1; j < rig.views.size(); ++j) {
      if (rig.views[i].view_id == rig.views[j].view_id) {
        fail("ConfigOutOfRange",
             "duplicate view id " + std::to_string(rig.views[i].view_id));
      }
    }
  }
}

Projection project(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   const Eigen::Vector3d& point_world) {
  Projection out;
  if (!try_project(intrinsics, pose, point_world, &out)) {
    fail("NonPositiveDepth", "point is behind the camera plane");
  }
  return out;
}

Projection project(const CameraView& view, const Eigen::Vector3d& point_world) {
  return project(view.intrinsics, view.pose, point_world);
}

bool try_project(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                 const Eigen::Vector3d& point_world, Projection* out) {
  const Eigen::Vector3d cam = pose.rotation * point_world + pose.translation;
  if (!(cam.z() > kMinDepth)) return false;
  out->pixel.x() = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
  out->pixel.y() = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
  out->depth = cam.z();
  return true;
}

Eigen::Vector3d back_project(const CameraIntrinsics& intrinsics,
                             const CameraPose& pose,
                             const Eigen::Vector2d& pixel, double z) {
  if (!(z > 0.0)) fail("NonPositiveDepth", "depth must be positive");
  return camera_center(pose) + z * depth_direction(intrinsics, pose, pixel);
}

Eigen::Vector3d back_project(const CameraView& view,
                             const Eigen::Vector2d& pixel, double z) {
  return back_project(view.intrinsics, view.pose, pixel, z);
}

Eigen::Vector3d camera_center(const CameraPose& pose) {
  return -(pose.rotation.transpose() * pose.translation);
}

Eigen::Vector3d depth_direction(const CameraIntrinsics& intrinsics,
                                const CameraPose& pose,
                                const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d cam((pixel.x() - intrinsics.cx) / intrinsics.fx,
                            (pixel.y() - intrinsics.cy) / intrinsics.fy, 1.0);
  return pose.rotation.transpose() * cam;
}

Ray pixel_ray(const CameraIntrinsics& intrinsics, const CameraPose& pose,
              const Eigen::Vector2d& pixel) {
  Ray ray;
  ray.origin = camera_center(pose);
  ray.direction = depth_direction(intrinsics, pose, pixel).normalized();
  return ray;
}

CameraPose relative_pose(const CameraPose& from, const CameraPose& to) {
  CameraPose rel;
  rel.rotation = to.rotation * from.rotation.transpose();
  rel.translation = to.translation - rel.rotation * from.translation;
  return rel;
}

CameraPose compose(const CameraPose& outer, const CameraPose& inner) {
  CameraPose out;
  out.rotation = outer.rotation * inner.rotation;
  out.translation = outer.rotation * inner.translation + outer.translation;
  return out;
}

CameraPose inverse(const CameraPose& pose) {
  CameraPose out;
  out.rotation = pose.rotation.transpose();
  out.translation = -(pose.rotation.transpose() * pose.translation);
  return out;
}

double rotation_angle(const Eigen::Matrix3d& rotation) {
  const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

double pose_distance(const CameraPose& a, const CameraPose& b, double w_rot) {
  const CameraPose rel = relative_pose(a, b);
  return rel.translation.norm() + w_rot * rotation_angle(rel.rotation);
}

CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                   const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d down = -up;
  // Remove the forward component so the frame stays orthonormal even when
  // `up` is not exactly perpendicular to the view direction.
  down -= down.dot(forward) * forward;
  const double norm = down.norm();
  if (norm < 1e-12) {
    fail("ConfigOutOfRange", "look_at up direction parallel to view direction");
  }
  down /= norm;
  const Eigen::Vector3d right = down.cross(forward);

  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -(pose.rotation * eye);
  return pose;
}

double scene_diameter(const CameraRig& rig) {
  double best = 0.0;
  for (size_t i = 0; i < rig.views.size(); ++i) {
    const Eigen::Vector3d ci = camera_center(rig.views[i].pose);
    for (size_t j = i + 1; j < rig.views.size(); ++j) {
      best = std::max(best, (ci - camera_center(rig.views[j].pose)).norm());
    }
  }
  return best > 1e-12 ? best : 1.0;
}

}  // namespace sv
