#include "sv/view_synth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Geometry>

#include "sv/error.h"
#include "sv/parallel.h"
#include "sv/random.h"

namespace sv {

namespace {

// Snap near-integer coordinates so that exact round trips (identity warps)
// land on one pixel instead of smearing across a zero-weight neighbor.
double snap_to_grid(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

void require_view_sized(const CameraView& cam, int width, int height,
                        const char* what) {
  if (cam.intrinsics.width != width || cam.intrinsics.height != height) {
    fail("DimensionMismatch",
         std::string(what) + " size does not match camera intrinsics");
  }
}

// Shared forward-splat skeleton: visits each valid source pixel, projects it
// into the virtual camera, and hands every positive-weight integer neighbor
// to `emit(x, y, virtual_depth, src_x, src_y)`. Sequential on purpose: the
// z-buffer tie-break (first writer wins on equal depth) stays deterministic.
template <typename Emit>
void splat_forward(const DepthMap& src_depth, const CameraView& src_cam,
                   const CameraView& vir_cam, const Emit& emit) {
  for (int y = 0; y < src_depth.height; ++y) {
    for (int x = 0; x < src_depth.width; ++x) {
      if (!src_depth.is_valid(x, y)) continue;
      const double z = src_depth.value(x, y);
      const Eigen::Vector3d point =
          back_project(src_cam, Eigen::Vector2d(x, y), z);
      Projection proj;
      if (!try_project(vir_cam.intrinsics, vir_cam.pose, point, &proj)) {
        continue;
      }
      const double u = snap_to_grid(proj.pixel.x());
      const double v = snap_to_grid(proj.pixel.y());
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      for (int dy = 0; dy <= 1; ++dy) {
        const int yy = y0 + dy;
        const double wy = 1.0 - std::abs(v - yy);
        if (wy <= 0.0) continue;
        for (int dx = 0; dx <= 1; ++dx) {
          const int xx = x0 + dx;
          const double wx = 1.0 - std::abs(u - xx);
          if (wx <= 0.0) continue;
          if (xx < 0 || xx >= vir_cam.intrinsics.width || yy < 0 ||
              yy >= vir_cam.intrinsics.height) {
            continue;
          }
          emit(xx, yy, proj.depth, x, y);
        }
      }
    }
  }
}

}  // namespace

DepthMap fill_holes(const DepthMap& depth, int max_radius) {
  if (max_radius < 0) {
    fail("ConfigOutOfRange", "fill radius must be >= 0");
  }
  DepthMap out = depth;
  const size_t total =
      static_cast<size_t>(depth.width) * static_cast<size_t>(depth.height);
  if (max_radius == 0 || depth.valid_count() == 0 ||
      depth.valid_count() == total) {
    return out;
  }
  parallel_for(0, depth.height, [&](int64_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < depth.width; ++x) {
      if (depth.is_valid(x, y)) continue;
      double weight_sum = 0.0;
      double value_sum = 0.0;
      auto probe = [&](int px, int py) {
        if (!depth.in_bounds(px, py) || !depth.is_valid(px, py)) return;
        const double dx = px - x;
        const double dy = py - y;
        const double w = 1.0 / std::sqrt(dx * dx + dy * dy);
        weight_sum += w;
        value_sum += w * depth.value(px, py);
      };
      for (int r = 1; r <= max_radius; ++r) {
        for (int dx = -r; dx <= r; ++dx) {
          probe(x + dx, y - r);
          probe(x + dx, y + r);
        }
        for (int dy = -r + 1; dy <= r - 1; ++dy) {
          probe(x - r, y + dy);
          probe(x + r, y + dy);
        }
        if (weight_sum > 0.0) {
          out.set(x, y, static_cast<float>(value_sum / weight_sum));
          break;
        }
      }
    }
  });
  return out;
}

ForwardWarp warp_depth_forward(const DepthMap& src_depth,
                               const CameraView& src_cam,
                               const CameraView& vir_cam, int fill_radius) {
  require_view_sized(src_cam, src_depth.width, src_depth.height,
                     "source depth");
  ForwardWarp result;
  result.depth =
      DepthMap(vir_cam.intrinsics.width, vir_cam.intrinsics.height);
  splat_forward(src_depth, src_cam, vir_cam,
                [&](int x, int y, double z, int, int) {
                  const float zf = static_cast<float>(z);
                  if (zf <= 0.0f) return;
                  if (!result.depth.is_valid(x, y) ||
                      zf < result.depth.value(x, y)) {
                    result.depth.set(x, y, zf);
                  }
                });
  result.coverage = Mask(result.depth.width, result.depth.height);
  result.coverage.data = result.depth.valid;
  result.depth = fill_holes(result.depth, fill_radius);
  return result;
}

std::pair<Image, Mask> warp_image_backward(const Image& src_image,
                                           const CameraView& src_cam,
                                           const CameraView& vir_cam,
                                           const DepthMap& vir_depth) {
  require_view_sized(src_cam, src_image.width, src_image.height,
                     "source image");
  require_view_sized(vir_cam, vir_depth.width, vir_depth.height,
                     "virtual depth");
  Image image(vir_depth.width, vir_depth.height);
  Mask mask(vir_depth.width, vir_depth.height, 0);
  parallel_for(0, vir_depth.height, [&](int64_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < vir_depth.width; ++x) {
      if (!vir_depth.is_valid(x, y)) continue;
      const Eigen::Vector3d point = back_project(
          vir_cam, Eigen::Vector2d(x, y), vir_depth.value(x, y));
      Projection proj;
      if (!try_project(src_cam.intrinsics, src_cam.pose, point, &proj)) {
        continue;
      }
      float rgb[3];
      if (!bilinear_rgb(src_image, snap_to_grid(proj.pixel.x()),
                        snap_to_grid(proj.pixel.y()), rgb)) {
        continue;
      }
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = rgb[c];
      mask.at(x, y) = 1;
    }
  });
  return {std::move(image), std::move(mask)};
}

double pose_score(const CameraPose& src, const CameraPose& vir, double w_rot) {
  if (w_rot < 0) fail("ConfigOutOfRange", "w_rot must be >= 0");
  return 1.0 / (1.0 + pose_distance(src, vir, w_rot));
}

namespace {

bool poses_match(const CameraView& a, const CameraView& b) {
  if (a.intrinsics.width != b.intrinsics.width ||
      a.intrinsics.height != b.intrinsics.height) {
    return false;
  }
  const double tol = 1e-9;
  if (std::abs(a.intrinsics.fx - b.intrinsics.fx) > tol ||
      std::abs(a.intrinsics.fy - b.intrinsics.fy) > tol ||
      std::abs(a.intrinsics.cx - b.intrinsics.cx) > tol ||
      std::abs(a.intrinsics.cy - b.intrinsics.cy) > tol) {
    return false;
  }
  if ((a.pose.rotation - b.pose.rotation).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return (a.pose.translation - b.pose.translation).cwiseAbs().maxCoeff() <=
         tol;
}

}  // namespace

VirtualView fuse_topk(const std::vector<VirtualView>& views, int k) {
  if (views.empty()) {
    fail("ConfigOutOfRange", "fuse_topk requires at least one view");
  }
  if (k < 1) fail("ConfigOutOfRange", "k must be >= 1");
  for (const VirtualView& v : views) {
    if (v.sources.empty()) {
      fail("ConfigOutOfRange", "fuse_topk input carries no source score");
    }
    if (!poses_match(views.front().cam, v.cam)) {
      fail("PoseMismatch", "fuse_topk inputs must share pose and intrinsics");
    }
  }

  std::vector<size_t> order(views.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const PoseScore& pa = views[a].sources.front();
    const PoseScore& pb = views[b].sources.front();
    if (pa.score != pb.score) return pa.score > pb.score;
    return pa.source_id < pb.source_id;
  });
  const size_t take = std::min<size_t>(static_cast<size_t>(k), order.size());

  VirtualView out = views[order[0]];
  out.sources.clear();
  for (size_t r = 0; r < take; ++r) {
    const VirtualView& v = views[order[r]];
    out.sources.insert(out.sources.end(), v.sources.begin(), v.sources.end());
  }
  for (int y = 0; y < out.mask.height; ++y) {
    for (int x = 0; x < out.mask.width; ++x) {
      if (out.mask.at(x, y)) continue;
      for (size_t r = 1; r < take; ++r) {
        const VirtualView& v = views[order[r]];
        if (!v.mask.at(x, y)) continue;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = v.image.at(x, y, c);
        if (v.depth.is_valid(x, y)) {
          out.depth.set(x, y, v.depth.value(x, y));
        }
        out.mask.at(x, y) = 1;
        break;
      }
    }
  }
  return out;
}

std::vector<CameraPose> generate_virtual_poses(const CameraRig& rig, int count,
                                               uint64_t seed) {
  if (count < 0) fail("ConfigOutOfRange", "count must be >= 0");
  const int n = static_cast<int>(rig.views.size());
  if (n < 2) {
    fail("InsufficientViews",
         "virtual pose interpolation needs at least 2 training views");
  }
  Rng rng(seed);
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int a = rng.uniform_int(0, n - 1);
    int b = rng.uniform_int(0, n - 2);
    if (b >= a) ++b;
    const double t = rng.uniform(0.1, 0.9);
    const CameraPose& pa = rig.views[static_cast<size_t>(a)].pose;
    const CameraPose& pb = rig.views[static_cast<size_t>(b)].pose;
    const Eigen::Vector3d center =
        (1.0 - t) * camera_center(pa) + t * camera_center(pb);
    const Eigen::Quaterniond qa(pa.rotation);
    const Eigen::Quaterniond qb(pb.rotation);
    const Eigen::Matrix3d rotation =
        qa.slerp(t, qb).normalized().toRotationMatrix();
    CameraPose pose;
    pose.rotation = rotation;
    pose.translation = -rotation * center;
    poses.push_back(pose);
  }
  return poses;
}

VirtualView synthesize(const std::vector<SourceView>& sources,
                       const CameraView& vir_cam, const WarpConfig& config) {
  if (sources.empty()) {
    fail("InsufficientViews", "synthesize requires at least one source view");
  }
  if (config.k < 1 || config.k > static_cast<int>(sources.size())) {
    fail("ConfigOutOfRange",
         "k must be between 1 and the number of source views");
  }

  std::vector<size_t> order(sources.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<double> scores(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    scores[i] = pose_score(sources[i].cam.pose, vir_cam.pose, config.w_rot);
  }
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return sources[a].cam.view_id < sources[b].cam.view_id;
  });

  std::vector<VirtualView> warped;
  warped.reserve(static_cast<size_t>(config.k));
  for (int r = 0; r < config.k; ++r) {
    const SourceView& src = sources[order[static_cast<size_t>(r)]];
    const ForwardWarp forward =
        warp_depth_forward(src.depth, src.cam, vir_cam, config.fill_radius);
    auto [image, mask] =
        warp_image_backward(src.image, src.cam, vir_cam, forward.depth);
    VirtualView view;
    view.cam = vir_cam;
    view.image = std::move(image);
    view.depth = forward.depth;
    view.mask = std::move(mask);
    view.sources.push_back(
        {src.cam.view_id, scores[order[static_cast<size_t>(r)]]});
    warped.push_back(std::move(view));
  }
  return fuse_topk(warped, config.k);
}

VirtualView warp_forward_baseline(const SourceView& src,
                                  const CameraView& vir_cam,
                                  const WarpConfig& config) {
  require_view_sized(src.cam, src.depth.width, src.depth.height,
                     "source depth");
  require_view_sized(src.cam, src.image.width, src.image.height,
                     "source image");
  VirtualView view;
  view.cam = vir_cam;
  view.image = Image(vir_cam.intrinsics.width, vir_cam.intrinsics.height);
  view.depth = DepthMap(vir_cam.intrinsics.width, vir_cam.intrinsics.height);
  splat_forward(src.depth, src.cam, vir_cam,
                [&](int x, int y, double z, int sx, int sy) {
                  const float zf = static_cast<float>(z);
                  if (zf <= 0.0f) return;
                  if (view.depth.is_valid(x, y) &&
                      zf >= view.depth.value(x, y)) {
                    return;
                  }
                  view.depth.set(x, y, zf);
                  for (int c = 0; c < 3; ++c) {
                    view.image.at(x, y, c) = src.image.at(sx, sy, c);
                  }
                });
  view.mask = Mask(view.depth.width, view.depth.height);
  view.mask.data = view.depth.valid;
  view.sources.push_back(
      {src.cam.view_id,
       pose_score(src.cam.pose, vir_cam.pose, config.w_rot)});
  return view;
}

}  // namespace sv
