#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sv/geometry.h"
#include "sv/random.h"

namespace {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

template <typename F>
std::string thrown_code(F&& f) {
  try {
    f();
  } catch (const sv::Error& e) {
    return e.code();
  }
  return "";
}

sv::CameraIntrinsics test_intrinsics() {
  sv::CameraIntrinsics intr;
  intr.fx = 100.0;
  intr.fy = 100.0;
  intr.cx = 50.0;
  intr.cy = 50.0;
  intr.width = 101;
  intr.height = 101;
  return intr;
}

Matrix3d random_rotation(sv::Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

sv::CameraPose random_pose(sv::Rng& rng) {
  sv::CameraPose pose;
  pose.rotation = random_rotation(rng);
  pose.translation =
      Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return pose;
}

// World point at a random pixel/depth in front of the camera, built from the
// camera-frame formula directly (not via back_project).
Vector3d random_point_in_front(const sv::CameraIntrinsics& intr,
                               const sv::CameraPose& pose, sv::Rng& rng) {
  const double u = rng.uniform(0, intr.width - 1);
  const double v = rng.uniform(0, intr.height - 1);
  const double z = rng.uniform(0.5, 10.0);
  const Vector3d cam((u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z,
                     z);
  return pose.rotation.transpose() * (cam - pose.translation);
}

}  // namespace

TEST_CASE("project maps axis and unit-offset points per the pinhole model") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  const sv::CameraPose identity;

  const sv::Projection on_axis = sv::project(intr, identity, {0, 0, 2});
  CHECK(on_axis.pixel.x() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(on_axis.pixel.y() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(on_axis.depth == doctest::Approx(2.0).epsilon(1e-12));

  const sv::Projection offset = sv::project(intr, identity, {1, 0, 2});
  CHECK(offset.pixel.x() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(offset.pixel.y() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(offset.depth == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("project equals a hand-composed K[R|t] homogeneous pipeline") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  sv::Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const sv::CameraPose pose = random_pose(rng);
    const Vector3d point = random_point_in_front(intr, pose, rng);

    Matrix3d k = Matrix3d::Zero();
    k(0, 0) = intr.fx;
    k(1, 1) = intr.fy;
    k(0, 2) = intr.cx;
    k(1, 2) = intr.cy;
    k(2, 2) = 1.0;
    Eigen::Matrix<double, 3, 4> rt;
    rt.leftCols<3>() = pose.rotation;
    rt.col(3) = pose.translation;
    const Vector3d y = k * (rt * point.homogeneous());

    const sv::Projection got = sv::project(intr, pose, point);
    CHECK(got.pixel.x() == doctest::Approx(y.x() / y.z()).epsilon(1e-9));
    CHECK(got.pixel.y() == doctest::Approx(y.y() / y.z()).epsilon(1e-9));
    CHECK(got.depth == doctest::Approx(y.z()).epsilon(1e-9));
  }
}

TEST_CASE("project rejects points at or behind the camera plane") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  const sv::CameraPose identity;
  CHECK_EQ(thrown_code([&] { sv::project(intr, identity, {0, 0, -1}); }),
           "NonPositiveDepth");
  CHECK_EQ(thrown_code([&] { sv::project(intr, identity, {0.3, 0.1, 0}); }),
           "NonPositiveDepth");

  sv::Projection out;
  CHECK_FALSE(sv::try_project(intr, identity, {0, 0, -1}, &out));
  CHECK(sv::try_project(intr, identity, {0, 0, 1}, &out));
  CHECK(out.depth == doctest::Approx(1.0));
}

TEST_CASE("back_project sends the principal pixel down the optical axis") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  const sv::CameraPose identity;
  const Vector3d point = sv::back_project(intr, identity, {50, 50}, 5.0);
  CHECK(point.isApprox(Vector3d(0, 0, 5), 1e-12));
  CHECK_EQ(thrown_code([&] { sv::back_project(intr, identity, {50, 50}, 0.0); }),
           "NonPositiveDepth");
}

TEST_CASE("project(back_project) round trips pixels and depths") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  sv::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const sv::CameraPose pose = random_pose(rng);
    const Vector2d pixel(rng.uniform(0, intr.width - 1),
                         rng.uniform(0, intr.height - 1));
    const double z = rng.uniform(0.2, 20.0);
    const sv::Projection back =
        sv::project(intr, pose, sv::back_project(intr, pose, pixel, z));
    CHECK(back.pixel.x() == doctest::Approx(pixel.x()).epsilon(1e-9));
    CHECK(back.pixel.y() == doctest::Approx(pixel.y()).epsilon(1e-9));
    CHECK(back.depth == doctest::Approx(z).epsilon(1e-9));
  }
}

TEST_CASE("back_project recovers the camera-frame coordinates directly") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  sv::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const sv::CameraPose pose = random_pose(rng);
    const double u = rng.uniform(0, 100);
    const double v = rng.uniform(0, 100);
    const double z = rng.uniform(0.5, 8.0);
    const Vector3d world = sv::back_project(intr, pose, {u, v}, z);
    const Vector3d cam = pose.rotation * world + pose.translation;
    CHECK(cam.x() == doctest::Approx((u - intr.cx) / intr.fx * z).epsilon(1e-9));
    CHECK(cam.y() == doctest::Approx((v - intr.cy) / intr.fy * z).epsilon(1e-9));
    CHECK(cam.z() == doctest::Approx(z).epsilon(1e-9));
  }
}

TEST_CASE("back_project is affine in depth: center + z * direction") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  sv::Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const sv::CameraPose pose = random_pose(rng);
    const Vector2d pixel(rng.uniform(0, 100), rng.uniform(0, 100));
    const Vector3d center = sv::camera_center(pose);
    const Vector3d dir = sv::depth_direction(intr, pose, pixel);
    for (const double z : {0.3, 1.0, 4.5}) {
      const Vector3d direct = sv::back_project(intr, pose, pixel, z);
      CHECK((direct - (center + z * dir)).norm() < 1e-9);
    }
    // direction has unit camera-frame z, so its rotated z-component is 1
    CHECK((pose.rotation * dir).z() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pixel_ray passes through the camera center toward the pixel") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  sv::Rng rng(15);
  const sv::CameraPose pose = random_pose(rng);
  const Vector2d pixel(30.5, 71.25);
  const sv::Ray ray = sv::pixel_ray(intr, pose, pixel);
  CHECK((ray.origin - sv::camera_center(pose)).norm() < 1e-12);
  CHECK(ray.direction.norm() == doctest::Approx(1.0).epsilon(1e-12));
  const sv::Projection hit =
      sv::project(intr, pose, ray.origin + 3.0 * ray.direction);
  CHECK(hit.pixel.x() == doctest::Approx(pixel.x()).epsilon(1e-9));
  CHECK(hit.pixel.y() == doctest::Approx(pixel.y()).epsilon(1e-9));
}

TEST_CASE("relative_pose identities") {
  sv::Rng rng(16);
  const sv::CameraPose p = random_pose(rng);
  const sv::CameraPose self = sv::relative_pose(p, p);
  CHECK(self.rotation.isApprox(Matrix3d::Identity(), 1e-12));
  CHECK(self.translation.norm() < 1e-12);

  const sv::CameraPose from_identity = sv::relative_pose(sv::CameraPose{}, p);
  CHECK(from_identity.rotation.isApprox(p.rotation, 1e-12));
  CHECK((from_identity.translation - p.translation).norm() < 1e-12);
}

TEST_CASE("relative_pose chains compose consistently") {
  sv::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const sv::CameraPose a = random_pose(rng);
    const sv::CameraPose b = random_pose(rng);
    const sv::CameraPose c = random_pose(rng);
    const sv::CameraPose direct = sv::relative_pose(a, c);
    const sv::CameraPose chained =
        sv::compose(sv::relative_pose(b, c), sv::relative_pose(a, b));
    CHECK(direct.rotation.isApprox(chained.rotation, 1e-9));
    CHECK((direct.translation - chained.translation).norm() < 1e-9);
  }
}

TEST_CASE("inverse undoes a pose under composition") {
  sv::Rng rng(18);
  const sv::CameraPose p = random_pose(rng);
  const sv::CameraPose round = sv::compose(sv::inverse(p), p);
  CHECK(round.rotation.isApprox(Matrix3d::Identity(), 1e-12));
  CHECK(round.translation.norm() < 1e-12);
}

TEST_CASE("rotation_angle and pose_distance scale as advertised") {
  CHECK(sv::rotation_angle(Matrix3d::Identity()) == doctest::Approx(0.0));
  const Matrix3d quarter =
      Eigen::AngleAxisd(M_PI / 2, Vector3d::UnitY()).toRotationMatrix();
  CHECK(sv::rotation_angle(quarter) == doctest::Approx(M_PI / 2).epsilon(1e-12));

  sv::CameraPose a, b;
  b.translation = Vector3d(3, 0, 4);  // norm 5
  CHECK(sv::pose_distance(a, a, 1.0) == doctest::Approx(0.0));
  CHECK(sv::pose_distance(a, b, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  b.rotation = quarter;
  // translation of the relative pose changes with rotation, so isolate the
  // rotation term via w_rot differences instead.
  const double d1 = sv::pose_distance(a, b, 1.0);
  const double d2 = sv::pose_distance(a, b, 3.0);
  CHECK(d2 - d1 == doctest::Approx(2.0 * M_PI / 2).epsilon(1e-9));
}

TEST_CASE("look_at with image-up = world -y yields identity for +z gaze") {
  const sv::CameraPose pose =
      sv::look_at(Vector3d::Zero(), Vector3d(0, 0, 1), Vector3d(0, -1, 0));
  CHECK(pose.rotation.isApprox(Matrix3d::Identity(), 1e-12));
  CHECK(pose.translation.norm() < 1e-12);
}

TEST_CASE("look_at keeps the target on the optical axis") {
  const sv::CameraIntrinsics intr = test_intrinsics();
  const Vector3d eye(2, -1, 0.5);
  const Vector3d target(-3, 4, 9);
  const sv::CameraPose pose = sv::look_at(eye, target, Vector3d(0, -1, 0));
  const sv::Projection proj = sv::project(intr, pose, target);
  CHECK(proj.pixel.x() == doctest::Approx(intr.cx).epsilon(1e-9));
  CHECK(proj.pixel.y() == doctest::Approx(intr.cy).epsilon(1e-9));
  CHECK(proj.depth == doctest::Approx((target - eye).norm()).epsilon(1e-9));
  CHECK((sv::camera_center(pose) - eye).norm() < 1e-9);
}

TEST_CASE("scene_diameter is the max pairwise center distance") {
  sv::CameraRig rig;
  sv::CameraView v;
  v.intrinsics = test_intrinsics();
  v.view_id = 0;
  rig.views.push_back(v);
  CHECK(sv::scene_diameter(rig) == doctest::Approx(1.0));

  v.view_id = 1;
  v.pose.translation = Vector3d(-2, 0, 0);  // center at (2, 0, 0)
  rig.views.push_back(v);
  v.view_id = 2;
  v.pose.translation = Vector3d(-7, 0, 0);  // center at (7, 0, 0)
  rig.views.push_back(v);
  CHECK(sv::scene_diameter(rig) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("validate rejects malformed intrinsics, poses, and rigs") {
  sv::CameraIntrinsics intr = test_intrinsics();
  intr.fx = 0.0;
  CHECK_EQ(thrown_code([&] { sv::validate(intr); }), "ConfigOutOfRange");

  sv::CameraPose skewed;
  skewed.rotation(0, 0) = 2.0;
  CHECK_EQ(thrown_code([&] { sv::validate(skewed); }), "ConfigOutOfRange");

  sv::CameraRig rig;
  sv::CameraView v;
  v.view_id = 3;
  v.intrinsics = test_intrinsics();
  rig.views.push_back(v);
  rig.views.push_back(v);  // duplicate id
  CHECK_EQ(thrown_code([&] { sv::validate(rig); }), "ConfigOutOfRange");
}
