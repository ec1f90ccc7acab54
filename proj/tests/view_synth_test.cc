#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sv/geometry.h"
#include "sv/image.h"
#include "sv/metrics.h"
#include "sv/random.h"
#include "sv/synth_scene.h"
#include "sv/view_synth.h"

namespace {

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

sv::CameraView make_camera(int id, int width, int height, double f,
                           const Vector3d& eye = Vector3d::Zero()) {
  sv::CameraView cam;
  cam.view_id = id;
  cam.intrinsics.fx = f;
  cam.intrinsics.fy = f;
  cam.intrinsics.cx = width / 2.0;
  cam.intrinsics.cy = height / 2.0;
  cam.intrinsics.width = width;
  cam.intrinsics.height = height;
  cam.pose.translation = -eye;  // identity rotation
  return cam;
}

sv::DepthMap constant_depth(int width, int height, float d) {
  sv::DepthMap map(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) map.set(x, y, d);
  }
  return map;
}

sv::SourceView rendered_source(const sv::SyntheticScene& scene, int view_id) {
  sv::SourceView src;
  src.cam = scene.rig.view(view_id);
  src.image = sv::render_image(scene, view_id);
  src.depth = sv::render_depth(scene, view_id);
  return src;
}

size_t mask_count(const sv::Mask& mask) {
  size_t n = 0;
  for (uint8_t v : mask.data) n += (v != 0);
  return n;
}

double max_image_diff(const sv::Image& a, const sv::Image& b,
                      const sv::Mask* mask = nullptr) {
  double worst = 0.0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        worst = std::max(
            worst, std::abs(double(a.at(x, y, c)) - double(b.at(x, y, c))));
      }
    }
  }
  return worst;
}

sv::VirtualView constant_view(const sv::CameraView& cam, float gray,
                              float depth, int source_id, double score) {
  sv::VirtualView v;
  v.cam = cam;
  v.image = sv::Image(cam.intrinsics.width, cam.intrinsics.height);
  std::fill(v.image.data.begin(), v.image.data.end(), gray);
  v.depth = constant_depth(cam.intrinsics.width, cam.intrinsics.height, depth);
  v.mask = sv::Mask(cam.intrinsics.width, cam.intrinsics.height, 1);
  v.sources.push_back({source_id, score});
  return v;
}

}  // namespace

TEST_CASE("warping a view onto its own pose is the identity") {
  const sv::SyntheticScene scene = sv::make_preset("occluder-square", 3);
  const sv::CameraView& cam = scene.rig.view(0);
  const sv::DepthMap depth = sv::render_depth(scene, 0);
  const sv::Image image = sv::render_image(scene, 0);

  const sv::ForwardWarp forward = sv::warp_depth_forward(depth, cam, cam, 0);
  CHECK(forward.coverage.data == depth.valid);
  CHECK(forward.depth.valid == depth.valid);
  double worst = 0.0;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      worst = std::max(worst, std::abs(double(forward.depth.value(x, y)) -
                                       double(depth.value(x, y))));
    }
  }
  CHECK(worst < 1e-6);

  const auto [warped, mask] = sv::warp_image_backward(image, cam, cam, depth);
  CHECK(mask.data == depth.valid);  // full coverage scene: every lookup lands
  CHECK(max_image_diff(warped, image, &mask) < 1e-6);
}

TEST_CASE("identity warp of a partially covered map keeps its footprint") {
  // a small rect fills only part of the frame; identity warp with no hole
  // filling must reproduce exactly that footprint
  sv::SyntheticScene scene;
  scene.name = "small-rect";
  sv::Primitive rect;
  rect.kind = sv::PrimitiveKind::kRect;
  rect.center = Vector3d(0, 0, 2);
  rect.half_u = 0.6;
  rect.half_v = 0.45;
  scene.primitives.push_back(rect);
  const sv::CameraView cam = make_camera(0, 320, 240, 200.0);
  const sv::DepthMap depth = sv::render_depth(scene, cam);
  REQUIRE(depth.valid_count() > 0);
  REQUIRE(depth.valid_count() < 320u * 240u);

  const sv::ForwardWarp forward = sv::warp_depth_forward(depth, cam, cam, 0);
  CHECK(forward.depth.valid == depth.valid);
  CHECK(forward.coverage.data == depth.valid);
}

TEST_CASE("pure translation over a plane shifts the frame by fx*tx/d") {
  sv::SyntheticScene scene;
  scene.name = "plane";
  sv::Primitive plane;
  plane.kind = sv::PrimitiveKind::kRect;
  plane.center = Vector3d(0, 0, 2);
  plane.half_u = 3.0;
  plane.half_v = 2.0;
  plane.texture.kind = sv::TextureKind::kPlaid;
  plane.texture.scale = 4.0;
  plane.texture.color_a = Vector3d(0.9, 0.7, 0.2);
  plane.texture.color_b = Vector3d(0.1, 0.3, 0.8);
  scene.primitives.push_back(plane);

  const sv::CameraView src = make_camera(0, 320, 240, 200.0);
  // fx * tx / d = 200 * 0.12 / 2 = 12 px: exact integer disparity
  const sv::CameraView vir = make_camera(1, 320, 240, 200.0,
                                         Vector3d(0.12, 0, 0));
  const sv::DepthMap src_depth = sv::render_depth(scene, src);
  const sv::Image src_image = sv::render_image(scene, src);
  REQUIRE(src_depth.valid_count() == 320u * 240u);

  const sv::ForwardWarp forward =
      sv::warp_depth_forward(src_depth, src, vir, 0);
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      if (x <= 307) {  // source column x+12 exists
        REQUIRE(forward.coverage.at(x, y) == 1);
        REQUIRE(std::abs(forward.depth.value(x, y) - 2.0f) < 1e-6f);
      } else {  // the right strip is revealed: nothing lands there
        REQUIRE(forward.coverage.at(x, y) == 0);
        REQUIRE_FALSE(forward.depth.is_valid(x, y));
      }
    }
  }

  const auto [warped, mask] =
      sv::warp_image_backward(src_image, src, vir, forward.depth);
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      if (x <= 307) {
        REQUIRE(mask.at(x, y) == 1);
        for (int c = 0; c < 3; ++c) {
          // integer disparity: the lookup lands exactly on pixel (x+12, y)
          REQUIRE(std::abs(warped.at(x, y, c) - src_image.at(x + 12, y, c)) <
                  1e-6f);
        }
      } else {
        REQUIRE(mask.at(x, y) == 0);
      }
    }
  }
}

TEST_CASE("fractional disparity matches a hand-resampled source") {
  sv::SyntheticScene scene;
  scene.name = "plane";
  sv::Primitive plane;
  plane.kind = sv::PrimitiveKind::kRect;
  plane.center = Vector3d(0, 0, 2);
  plane.half_u = 3.0;
  plane.half_v = 2.0;
  plane.texture.kind = sv::TextureKind::kGradient;
  plane.texture.scale = 2.5;
  scene.primitives.push_back(plane);

  const sv::CameraView src = make_camera(0, 320, 240, 200.0);
  // 200 * 0.075 / 2 = 7.5 px disparity: exercises true bilinear blending
  const sv::CameraView vir = make_camera(1, 320, 240, 200.0,
                                         Vector3d(0.075, 0, 0));
  const sv::Image src_image = sv::render_image(scene, src);
  const sv::DepthMap vir_depth = constant_depth(320, 240, 2.0f);  // oracle

  const auto [warped, mask] =
      sv::warp_image_backward(src_image, src, vir, vir_depth);
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      if (x + 7.5 <= 319.0) {
        REQUIRE(mask.at(x, y) == 1);
        for (int c = 0; c < 3; ++c) {
          const double lerp = 0.5 * (double(src_image.at(x + 7, y, c)) +
                                     double(src_image.at(x + 8, y, c)));
          REQUIRE(std::abs(double(warped.at(x, y, c)) - lerp) < 1e-6);
        }
      } else {
        REQUIRE(mask.at(x, y) == 0);  // lookup leaves the source frame
      }
    }
  }
}

TEST_CASE("the z-buffer keeps the nearest of colliding splats") {
  const sv::CameraView src = make_camera(0, 128, 96, 100.0);
  const sv::CameraView vir = make_camera(1, 128, 96, 100.0, Vector3d(1, 0, 0));
  // u_vir = x - fx*tx/z: pixel (110, 48) at z=1 and pixel (60, 48) at z=2
  // both land exactly on virtual pixel (10, 48)
  sv::DepthMap src_depth(128, 96);
  src_depth.set(110, 48, 1.0f);
  src_depth.set(60, 48, 2.0f);

  const sv::ForwardWarp forward =
      sv::warp_depth_forward(src_depth, src, vir, 0);
  REQUIRE(forward.depth.is_valid(10, 48));
  CHECK(forward.depth.value(10, 48) == 1.0f);  // nearer candidate wins
  CHECK(forward.depth.valid_count() == 1u);
  CHECK(mask_count(forward.coverage) == 1u);

  // the baseline warp carries the winning pixel's color along
  sv::SourceView sv_src;
  sv_src.cam = src;
  sv_src.depth = src_depth;
  sv_src.image = sv::Image(128, 96);
  sv_src.image.at(110, 48, 0) = 1.0f;  // near pixel: red
  sv_src.image.at(60, 48, 2) = 1.0f;   // far pixel: blue
  const sv::VirtualView flat =
      sv::warp_forward_baseline(sv_src, vir, sv::WarpConfig{});
  REQUIRE(flat.mask.at(10, 48) == 1);
  CHECK(flat.image.at(10, 48, 0) == 1.0f);
  CHECK(flat.image.at(10, 48, 2) == 0.0f);
}

TEST_CASE("fill_holes: pass-throughs, ring search, and the ramp bound") {
  // fully valid: bitwise unchanged
  sv::DepthMap ramp(32, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      ramp.set(x, y, 1.0f + 0.1f * static_cast<float>(x));
    }
  }
  const sv::DepthMap same = sv::fill_holes(ramp, 16);
  CHECK(same.values == ramp.values);
  CHECK(same.valid == ramp.valid);

  // a single hole in a constant neighborhood fills with that constant
  sv::DepthMap constant = constant_depth(9, 9, 2.0f);
  constant.invalidate(4, 4);
  const sv::DepthMap filled = sv::fill_holes(constant, 16);
  REQUIRE(filled.is_valid(4, 4));
  CHECK(filled.value(4, 4) == doctest::Approx(2.0).epsilon(1e-12));

  // the nearest non-empty ring wins: ring 1 empty, ring 2 holds 5s, ring 3
  // holds 9s; the fill must use only the 5s
  sv::DepthMap rings(9, 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      const int cheb = std::max(std::abs(x - 4), std::abs(y - 4));
      if (cheb == 2) rings.set(x, y, 5.0f);
      if (cheb == 3) rings.set(x, y, 9.0f);
    }
  }
  const sv::DepthMap ringed = sv::fill_holes(rings, 8);
  REQUIRE(ringed.is_valid(4, 4));
  CHECK(ringed.value(4, 4) == doctest::Approx(5.0).epsilon(1e-12));

  // a 1-pixel crack across a linear ramp refills to the ramp value: the
  // ring-1 neighbors sit symmetrically, so the weighted mean is exact up to
  // float storage, well within one ramp step
  sv::DepthMap crack = ramp;
  for (int y = 0; y < 24; ++y) crack.invalidate(10, y);
  const sv::DepthMap mended = sv::fill_holes(crack, 16);
  for (int y = 0; y < 24; ++y) {
    REQUIRE(mended.is_valid(10, y));
    const double expect = 1.0 + 0.1 * 10.0;
    REQUIRE(std::abs(mended.value(10, y) - expect) < 1e-4);
    REQUIRE(std::abs(mended.value(10, y) - expect) < 0.1);  // one ramp step
  }

  // radius 0 disables filling; an all-invalid map stays that way
  const sv::DepthMap off = sv::fill_holes(crack, 0);
  CHECK(off.values == crack.values);
  CHECK(off.valid == crack.valid);
  const sv::DepthMap nothing = sv::fill_holes(sv::DepthMap(8, 8), 16);
  CHECK(nothing.valid_count() == 0);

  // reach is limited by max_radius in Chebyshev distance
  sv::DepthMap lone(16, 16);
  lone.set(0, 0, 3.0f);
  const sv::DepthMap reached = sv::fill_holes(lone, 3);
  CHECK(reached.is_valid(3, 3));
  CHECK(reached.value(3, 3) == doctest::Approx(3.0));
  CHECK_FALSE(reached.is_valid(4, 4));
  CHECK_FALSE(reached.is_valid(10, 10));

  // filling never rewrites surviving valid pixels
  sv::Rng rng(71);
  sv::DepthMap noisy(20, 20);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      if (rng.uniform() < 0.5) {
        noisy.set(x, y, static_cast<float>(rng.uniform(1.0, 5.0)));
      }
    }
  }
  const sv::DepthMap grown = sv::fill_holes(noisy, 4);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      if (noisy.is_valid(x, y)) {
        REQUIRE(grown.value(x, y) == noisy.value(x, y));
      }
    }
  }

  CHECK_EQ(thrown_code([&] { sv::fill_holes(ramp, -1); }), "ConfigOutOfRange");
}

TEST_CASE("backward warping masks points behind the source camera") {
  // the source camera sits at z=10 looking forward; virtual points at z=2
  // are behind it, so every lookup must fail
  const sv::CameraView src = make_camera(0, 64, 48, 100.0, Vector3d(0, 0, 10));
  const sv::CameraView vir = make_camera(1, 64, 48, 100.0);
  sv::Image src_image(64, 48);
  std::fill(src_image.data.begin(), src_image.data.end(), 0.7f);
  const sv::DepthMap vir_depth = constant_depth(64, 48, 2.0f);

  const auto [warped, mask] =
      sv::warp_image_backward(src_image, src, vir, vir_depth);
  CHECK(mask_count(mask) == 0);
  CHECK(max_image_diff(warped, sv::Image(64, 48)) == 0.0);
}

TEST_CASE("pose_score matches its closed form and ranking oracle") {
  sv::CameraPose identity;
  CHECK(sv::pose_score(identity, identity, 1.0) == 1.0);

  sv::CameraPose shifted;
  shifted.translation = Vector3d(1, 0, 0);
  CHECK(sv::pose_score(identity, shifted, 7.0) == doctest::Approx(0.5));
  CHECK(sv::pose_score(identity, shifted, 0.0) == doctest::Approx(0.5));

  sv::CameraPose rotated;
  rotated.rotation =
      Eigen::AngleAxisd(0.3, Vector3d::UnitY()).toRotationMatrix();
  CHECK(sv::pose_score(identity, rotated, 2.0) ==
        doctest::Approx(1.0 / 1.6).epsilon(1e-12));

  CHECK_EQ(thrown_code([&] { sv::pose_score(identity, identity, -1.0); }),
           "ConfigOutOfRange");

  // ranking against an independent recomputation of 1/(1 + |t| + w*theta)
  sv::Rng rng(81);
  auto random_pose = [&] {
    sv::CameraPose pose;
    const Vector3d axis =
        Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    pose.rotation =
        Eigen::AngleAxisd(rng.uniform(0.0, 2.5), axis).toRotationMatrix();
    pose.translation =
        Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    return pose;
  };
  const sv::CameraPose target = random_pose();
  const double w_rot = 0.7;
  std::vector<sv::CameraPose> poses;
  std::vector<double> scores, oracle;
  for (int t = 0; t < 25; ++t) {
    poses.push_back(random_pose());
    const sv::CameraPose& p = poses.back();
    scores.push_back(sv::pose_score(p, target, w_rot));
    const Eigen::Matrix3d r_rel = target.rotation * p.rotation.transpose();
    const double cos_theta =
        std::clamp((r_rel.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const Vector3d t_rel = target.translation - r_rel * p.translation;
    oracle.push_back(1.0 / (1.0 + t_rel.norm() + w_rot * theta));
    CHECK(scores.back() > 0.0);
    CHECK(scores.back() <= 1.0);
    CHECK(scores.back() == doctest::Approx(oracle.back()).epsilon(1e-9));
  }
  std::vector<size_t> by_score(poses.size()), by_oracle(poses.size());
  std::iota(by_score.begin(), by_score.end(), size_t{0});
  by_oracle = by_score;
  std::sort(by_score.begin(), by_score.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::sort(by_oracle.begin(), by_oracle.end(),
            [&](size_t a, size_t b) { return oracle[a] > oracle[b]; });
  CHECK(by_score == by_oracle);
}

TEST_CASE("fuse_topk ranks by score, keeps the base, and fills holes only") {
  const sv::CameraView cam = make_camera(9, 64, 48, 100.0);
  const sv::VirtualView a = constant_view(cam, 0.2f, 1.0f, 0, 0.9);
  const sv::VirtualView b = constant_view(cam, 0.5f, 2.0f, 1, 0.6);
  const sv::VirtualView c = constant_view(cam, 0.8f, 3.0f, 2, 0.3);

  const sv::VirtualView best = sv::fuse_topk({b, a, c}, 1);
  CHECK(best.image.data == a.image.data);
  CHECK(best.depth.values == a.depth.values);
  CHECK(best.mask.data == a.mask.data);
  REQUIRE(best.sources.size() == 1);
  CHECK(best.sources[0].source_id == 0);
  CHECK(best.sources[0].score == 0.9);

  // a fully valid base suppresses every lower-ranked contributor
  const sv::VirtualView fused = sv::fuse_topk({c, b, a}, 3);
  CHECK(fused.image.data == a.image.data);
  CHECK(fused.depth.values == a.depth.values);
  REQUIRE(fused.sources.size() == 3);
  CHECK(fused.sources[0].source_id == 0);
  CHECK(fused.sources[1].source_id == 1);
  CHECK(fused.sources[2].source_id == 2);

  // ties break toward the smaller source id
  const sv::VirtualView tie_hi = constant_view(cam, 0.1f, 1.0f, 3, 0.7);
  const sv::VirtualView tie_lo = constant_view(cam, 0.9f, 1.0f, 1, 0.7);
  const sv::VirtualView tied = sv::fuse_topk({tie_hi, tie_lo}, 2);
  CHECK(tied.image.data == tie_lo.image.data);
  CHECK(tied.sources[0].source_id == 1);

  // k beyond the list size just takes everything
  const sv::VirtualView overk = sv::fuse_topk({a, b}, 5);
  CHECK(overk.sources.size() == 2);

  CHECK_EQ(thrown_code([&] { sv::fuse_topk({}, 1); }), "ConfigOutOfRange");
  CHECK_EQ(thrown_code([&] { sv::fuse_topk({a, b}, 0); }), "ConfigOutOfRange");
  sv::VirtualView unscored = a;
  unscored.sources.clear();
  CHECK_EQ(thrown_code([&] { sv::fuse_topk({unscored}, 1); }),
           "ConfigOutOfRange");

  sv::VirtualView moved = b;
  moved.cam.pose.translation.x() += 1e-6;
  CHECK_EQ(thrown_code([&] { sv::fuse_topk({a, moved}, 2); }), "PoseMismatch");
  sv::VirtualView zoomed = b;
  zoomed.cam.intrinsics.fx += 1e-6;
  CHECK_EQ(thrown_code([&] { sv::fuse_topk({a, zoomed}, 2); }),
           "PoseMismatch");
}

TEST_CASE("complementary half-masks fuse verbatim into full coverage") {
  const sv::SyntheticScene scene = sv::make_preset("occluder-square", 3);
  const sv::Image image = sv::render_image(scene, 0);
  const sv::DepthMap depth = sv::render_depth(scene, 0);
  const sv::CameraView& cam = scene.rig.view(0);
  const int w = cam.intrinsics.width, h = cam.intrinsics.height;

  // contributor A owns the left half, B the right; outside its half each
  // carries zeros so any leakage would be visible
  sv::VirtualView left, right;
  left.cam = cam;
  right.cam = cam;
  left.image = sv::Image(w, h);
  right.image = sv::Image(w, h);
  left.depth = sv::DepthMap(w, h);
  right.depth = sv::DepthMap(w, h);
  left.mask = sv::Mask(w, h, 0);
  right.mask = sv::Mask(w, h, 0);
  left.sources.push_back({0, 0.5});
  right.sources.push_back({1, 0.8});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      sv::VirtualView& owner = x < w / 2 ? left : right;
      owner.mask.at(x, y) = 1;
      owner.depth.set(x, y, depth.value(x, y));
      for (int c = 0; c < 3; ++c) {
        owner.image.at(x, y, c) = image.at(x, y, c);
      }
    }
  }

  const sv::VirtualView fused = sv::fuse_topk({left, right}, 2);
  CHECK(mask_count(fused.mask) == static_cast<size_t>(w) * h);
  CHECK(fused.image.data == image.data);  // halves reassemble exactly
  CHECK(fused.depth.values == depth.values);
  CHECK(fused.depth.valid == depth.valid);
  REQUIRE(fused.sources.size() == 2);
  CHECK(fused.sources[0].source_id == 1);  // the better-scored right half
  CHECK(fused.sources[1].source_id == 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      REQUIRE(fused.mask.at(x, y) <= (fused.depth.is_valid(x, y) ? 1 : 0));
    }
  }
}

TEST_CASE("virtual poses interpolate centers linearly and rotations by slerp") {
  sv::CameraRig rig;
  sv::CameraView a = make_camera(0, 64, 48, 100.0);
  a.pose = sv::look_at(Vector3d(-1, 0, 0), Vector3d(0, 0, 2),
                       Vector3d(0, -1, 0));
  sv::CameraView b = make_camera(1, 64, 48, 100.0);
  b.pose = sv::look_at(Vector3d(1, 0.5, 0), Vector3d(0, 0, 2),
                       Vector3d(0, -1, 0));
  rig.views.push_back(a);
  rig.views.push_back(b);

  CHECK(sv::generate_virtual_poses(rig, 0, 1).empty());

  const Vector3d ca = sv::camera_center(a.pose);
  const Vector3d cb = sv::camera_center(b.pose);
  const Eigen::Quaterniond qa(a.pose.rotation);
  Eigen::Quaterniond qb(b.pose.rotation);
  if (qa.dot(qb) < 0) qb.coeffs() = -qb.coeffs();  // shortest arc
  const Eigen::Quaterniond q_rel = qa.conjugate() * qb;
  const Eigen::AngleAxisd rel(q_rel);

  const std::vector<sv::CameraPose> poses =
      sv::generate_virtual_poses(rig, 40, 5);
  REQUIRE(poses.size() == 40);
  for (const sv::CameraPose& pose : poses) {
    const Vector3d center = sv::camera_center(pose);
    // recover the interpolation parameter from the x coordinate, then check
    // the full center and the independently slerped rotation
    const double t = (center.x() - ca.x()) / (cb.x() - ca.x());
    CHECK(t > 0.1 - 1e-9);
    CHECK(t < 0.9 + 1e-9);
    CHECK((center - ((1.0 - t) * ca + t * cb)).norm() < 1e-9);
    const Eigen::Matrix3d oracle =
        (qa * Eigen::Quaterniond(
                  Eigen::AngleAxisd(t * rel.angle(), rel.axis())))
            .toRotationMatrix();
    CHECK((pose.rotation - oracle).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((pose.translation + pose.rotation * center).norm() < 1e-12);
  }

  // equal endpoints collapse the interpolation
  sv::CameraRig twin;
  twin.views.push_back(a);
  sv::CameraView a2 = a;
  a2.view_id = 1;
  twin.views.push_back(a2);
  for (const sv::CameraPose& pose : sv::generate_virtual_poses(twin, 10, 3)) {
    CHECK((pose.rotation - a.pose.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pose.translation - a.pose.translation).norm() < 1e-12);
  }

  // determinism in the seed
  const std::vector<sv::CameraPose> again =
      sv::generate_virtual_poses(rig, 40, 5);
  REQUIRE(again.size() == poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK((again[i].rotation - poses[i].rotation).norm() == 0.0);
    CHECK((again[i].translation - poses[i].translation).norm() == 0.0);
  }
  const std::vector<sv::CameraPose> other =
      sv::generate_virtual_poses(rig, 40, 6);
  bool any_diff = false;
  for (size_t i = 0; i < poses.size(); ++i) {
    any_diff = any_diff ||
               (other[i].translation - poses[i].translation).norm() > 0;
  }
  CHECK(any_diff);

  sv::CameraRig lonely;
  lonely.views.push_back(a);
  CHECK_EQ(thrown_code([&] { sv::generate_virtual_poses(lonely, 5, 1); }),
           "InsufficientViews");
  CHECK_EQ(thrown_code([&] { sv::generate_virtual_poses(rig, -1, 1); }),
           "ConfigOutOfRange");
}

TEST_CASE("synthesize at a training pose with k=1 round-trips that view") {
  const sv::SyntheticScene scene = sv::make_preset("occluder-square", 3);
  std::vector<sv::SourceView> sources;
  for (int id : {0, 1, 2}) sources.push_back(rendered_source(scene, id));

  sv::WarpConfig config;
  config.k = 1;
  const sv::VirtualView out =
      sv::synthesize(sources, scene.rig.view(0), config);
  REQUIRE(out.sources.size() == 1);
  CHECK(out.sources[0].source_id == 0);
  CHECK(out.sources[0].score == 1.0);
  CHECK(mask_count(out.mask) == 320u * 240u);
  CHECK(max_image_diff(out.image, sources[0].image, &out.mask) < 1e-6);
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      REQUIRE(std::abs(out.depth.value(x, y) - sources[0].depth.value(x, y)) <
              1e-6f);
    }
  }

  // k=2 ranks the remaining sources by pose score: view 2 (0.22 away) beats
  // view 1 (0.4 away); the fully covered base leaves the output image alone
  config.k = 2;
  const sv::VirtualView two =
      sv::synthesize(sources, scene.rig.view(0), config);
  REQUIRE(two.sources.size() == 2);
  CHECK(two.sources[0].source_id == 0);
  CHECK(two.sources[1].source_id == 2);
  CHECK(two.sources[0].score > two.sources[1].score);
  CHECK(max_image_diff(two.image, sources[0].image, &two.mask) < 1e-6);
}

TEST_CASE("synthesis midway between cameras stays close to the true render") {
  const sv::SyntheticScene scene = sv::make_preset("plane3view", 3);
  std::vector<sv::SourceView> sources;
  for (int id : {0, 1, 2}) sources.push_back(rendered_source(scene, id));

  // midpoint of views 0 and 1, and an off-lattice pose with fractional
  // disparity: both must clear 30 dB against the analytic render
  for (const double eye_x : {-0.15, -0.1535}) {
    sv::CameraView vir = scene.rig.view(0);
    vir.view_id = 99;
    vir.pose.translation = Vector3d(-eye_x, 0, 0);
    sv::WarpConfig config;
    config.k = 2;
    const sv::VirtualView out = sv::synthesize(sources, vir, config);
    const sv::Image oracle = sv::render_image(scene, vir);
    REQUIRE(mask_count(out.mask) > 320u * 240u / 2);
    CHECK(sv::psnr(out.image, oracle, &out.mask) >= 30.0);
    for (int y = 0; y < 240; ++y) {
      for (int x = 0; x < 320; ++x) {
        if (out.mask.at(x, y)) REQUIRE(out.depth.is_valid(x, y));
      }
    }
  }

  // fused coverage never shrinks as k grows
  sv::CameraView vir = scene.rig.view(0);
  vir.view_id = 99;
  vir.pose.translation = Vector3d(0.15, 0, 0);
  size_t previous = 0;
  for (int k = 1; k <= 3; ++k) {
    sv::WarpConfig config;
    config.k = k;
    const size_t covered =
        mask_count(sv::synthesize(sources, vir, config).mask);
    CHECK(covered >= previous);
    previous = covered;
  }

  CHECK_EQ(thrown_code([&] { sv::synthesize({}, vir, sv::WarpConfig{}); }),
           "InsufficientViews");
  sv::WarpConfig bad;
  bad.k = 4;
  CHECK_EQ(thrown_code([&] { sv::synthesize(sources, vir, bad); }),
           "ConfigOutOfRange");
  bad.k = 0;
  CHECK_EQ(thrown_code([&] { sv::synthesize(sources, vir, bad); }),
           "ConfigOutOfRange");
}

TEST_CASE("the forward-splat baseline is exact at identity and leaves holes") {
  const sv::SyntheticScene scene = sv::make_preset("occluder-square", 3);
  const sv::SourceView src = rendered_source(scene, 0);

  const sv::VirtualView same =
      sv::warp_forward_baseline(src, scene.rig.view(0), sv::WarpConfig{});
  CHECK(same.mask.data == src.depth.valid);
  CHECK(same.image.data == src.image.data);  // colors are copied, not blended
  REQUIRE(same.sources.size() == 1);
  CHECK(same.sources[0].source_id == 0);
  CHECK(same.sources[0].score == 1.0);

  // moving to view 1 uncovers background behind the square: pure forward
  // splatting cannot fill those pixels
  const sv::VirtualView moved =
      sv::warp_forward_baseline(src, scene.rig.view(1), sv::WarpConfig{});
  CHECK(mask_count(moved.mask) > 0);
  CHECK(mask_count(moved.mask) < 320u * 240u);
}
