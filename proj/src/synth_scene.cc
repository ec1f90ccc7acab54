#include "sv/synth_scene.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sv/parallel.h"
#include "sv/random.h"

namespace sv {

namespace {
constexpr double kRayEps = 1e-9;
}  // namespace

Eigen::Vector3d texture_color(const Texture& texture, double u, double v) {
  switch (texture.kind) {
    case TextureKind::kChecker: {
      const long long iu = static_cast<long long>(std::floor(u * texture.scale));
      const long long iv = static_cast<long long>(std::floor(v * texture.scale));
      return ((iu + iv) & 1) == 0 ? texture.color_a : texture.color_b;
    }
    case TextureKind::kGradient: {
      const double t = 0.5 + 0.5 * std::sin(u * texture.scale);
      return texture.color_a + t * (texture.color_b - texture.color_a);
    }
    case TextureKind::kPlaid: {
      const double t = 0.5 + 0.25 * std::sin(u * texture.scale) +
                       0.25 * std::sin(v * texture.scale);
      return texture.color_a + t * (texture.color_b - texture.color_a);
    }
  }
  return texture.color_a;
}

namespace {

bool intersect_rect(const Primitive& p, const Ray& ray, HitRecord* hit) {
  const Eigen::Vector3d n = p.u_axis.cross(p.v_axis);
  const double denom = ray.direction.dot(n);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (p.center - ray.origin).dot(n) / denom;
  if (t <= kRayEps) return false;
  const Eigen::Vector3d point = ray.origin + t * ray.direction;
  const Eigen::Vector3d local = point - p.center;
  const double a = local.dot(p.u_axis);
  const double b = local.dot(p.v_axis);
  if (std::abs(a) > p.half_u || std::abs(b) > p.half_v) return false;
  hit->t = t;
  hit->point = point;
  hit->surface_uv = Eigen::Vector2d(a, b);
  return true;
}

bool intersect_sphere(const Primitive& p, const Ray& ray, HitRecord* hit) {
  const Eigen::Vector3d oc = ray.origin - p.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - p.radius * p.radius;
  const double disc = b * b - c;
  if (disc < 0) return false;
  const double root = std::sqrt(disc);
  double t = -b - root;
  if (t <= kRayEps) t = -b + root;
  if (t <= kRayEps) return false;
  const Eigen::Vector3d point = ray.origin + t * ray.direction;
  const Eigen::Vector3d local = (point - p.center) / p.radius;
  hit->t = t;
  hit->point = point;
  hit->surface_uv =
      Eigen::Vector2d(std::atan2(local.z(), local.x()) * p.radius,
                      std::asin(std::clamp(local.y(), -1.0, 1.0)) * p.radius);
  return true;
}

bool intersect_box(const Primitive& p, const Ray& ray, HitRecord* hit) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = p.center(a) - p.half_size(a);
    const double hi = p.center(a) + p.half_size(a);
    const double d = ray.direction(a);
    if (std::abs(d) < 1e-15) {
      if (ray.origin(a) < lo || ray.origin(a) > hi) return false;
      continue;
    }
    double ta = (lo - ray.origin(a)) / d;
    double tb = (hi - ray.origin(a)) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  const double t = t0 > kRayEps ? t0 : t1;
  if (t <= kRayEps) return false;
  const Eigen::Vector3d point = ray.origin + t * ray.direction;
  const Eigen::Vector3d local = point - p.center;
  // Texture coordinates from the two in-plane axes of the struck face.
  int face = 0;
  double best = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double r = std::abs(local(a)) / p.half_size(a);
    if (r > best) {
      best = r;
      face = a;
    }
  }
  hit->t = t;
  hit->point = point;
  hit->surface_uv = Eigen::Vector2d(local((face + 1) % 3), local((face + 2) % 3));
  return true;
}

}  // namespace

bool intersect_scene(const SyntheticScene& scene, const Ray& ray,
                     HitRecord* hit) {
  bool found = false;
  HitRecord best;
  best.t = std::numeric_limits<double>::infinity();
  for (const Primitive& p : scene.primitives) {
    HitRecord h;
    bool ok = false;
    switch (p.kind) {
      case PrimitiveKind::kRect:
        ok = intersect_rect(p, ray, &h);
        break;
      case PrimitiveKind::kSphere:
        ok = intersect_sphere(p, ray, &h);
        break;
      case PrimitiveKind::kBox:
        ok = intersect_box(p, ray, &h);
        break;
    }
    if (ok && h.t < best.t) {
      best = h;
      best.primitive_id = p.id;
      found = true;
    }
  }
  if (found) *hit = best;
  return found;
}

namespace {

const Primitive* find_primitive(const SyntheticScene& scene, int id) {
  for (const Primitive& p : scene.primitives) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

double camera_depth_of(const CameraView& cam, const Eigen::Vector3d& point) {
  return (cam.pose.rotation * point + cam.pose.translation).z();
}

}  // namespace

DepthMap render_depth(const SyntheticScene& scene, const CameraView& cam) {
  DepthMap depth(cam.intrinsics.width, cam.intrinsics.height);
  parallel_for(0, cam.intrinsics.height, [&](int64_t y) {
    for (int x = 0; x < cam.intrinsics.width; ++x) {
      const Ray ray = pixel_ray(cam.intrinsics, cam.pose,
                                Eigen::Vector2d(x, static_cast<double>(y)));
      HitRecord hit;
      if (intersect_scene(scene, ray, &hit)) {
        const double z = camera_depth_of(cam, hit.point);
        if (z > kMinDepth) {
          depth.set(x, static_cast<int>(y), static_cast<float>(z));
        }
      }
    }
  });
  return depth;
}

DepthMap render_depth(const SyntheticScene& scene, int view_id) {
  return render_depth(scene, scene.rig.view(view_id));
}

Image render_image(const SyntheticScene& scene, const CameraView& cam) {
  Image image(cam.intrinsics.width, cam.intrinsics.height);
  parallel_for(0, cam.intrinsics.height, [&](int64_t y) {
    for (int x = 0; x < cam.intrinsics.width; ++x) {
      const Ray ray = pixel_ray(cam.intrinsics, cam.pose,
                                Eigen::Vector2d(x, static_cast<double>(y)));
      HitRecord hit;
      if (!intersect_scene(scene, ray, &hit)) continue;
      const Primitive* prim = find_primitive(scene, hit.primitive_id);
      const Eigen::Vector3d rgb = texture_color(
          prim->texture, hit.surface_uv.x(), hit.surface_uv.y());
      for (int c = 0; c < 3; ++c) {
        image.at(x, static_cast<int>(y), c) =
            static_cast<float>(std::clamp(rgb(c), 0.0, 1.0));
      }
    }
  });
  return image;
}

Image render_image(const SyntheticScene& scene, int view_id) {
  return render_image(scene, scene.rig.view(view_id));
}

Mask render_primitive_mask(const SyntheticScene& scene, const CameraView& cam,
                           int primitive_id) {
  Mask mask(cam.intrinsics.width, cam.intrinsics.height, 0);
  parallel_for(0, cam.intrinsics.height, [&](int64_t y) {
    for (int x = 0; x < cam.intrinsics.width; ++x) {
      const Ray ray = pixel_ray(cam.intrinsics, cam.pose,
                                Eigen::Vector2d(x, static_cast<double>(y)));
      HitRecord hit;
      if (intersect_scene(scene, ray, &hit) &&
          hit.primitive_id == primitive_id) {
        mask.at(x, static_cast<int>(y)) = 1;
      }
    }
  });
  return mask;
}

Mask render_primitive_mask(const SyntheticScene& scene, int view_id,
                           int primitive_id) {
  return render_primitive_mask(scene, scene.rig.view(view_id), primitive_id);
}

bool point_visible(const SyntheticScene& scene, const CameraView& cam,
                   const Eigen::Vector3d& point) {
  Projection proj;
  if (!try_project(cam.intrinsics, cam.pose, point, &proj)) return false;
  if (proj.pixel.x() < 0 || proj.pixel.x() > cam.intrinsics.width - 1 ||
      proj.pixel.y() < 0 || proj.pixel.y() > cam.intrinsics.height - 1) {
    return false;
  }
  const Eigen::Vector3d center = camera_center(cam.pose);
  const double dist = (point - center).norm();
  if (dist < kRayEps) return false;
  Ray ray;
  ray.origin = center;
  ray.direction = (point - center) / dist;
  HitRecord hit;
  if (!intersect_scene(scene, ray, &hit)) return false;
  return std::abs(hit.t - dist) <= 1e-6 * std::max(1.0, dist);
}

LabeledMatches sample_matches(const SyntheticScene& scene, int view_i,
                              int view_j, int count, const NoiseSpec& noise,
                              uint64_t seed) {
  if (count < 0) fail("ConfigOutOfRange", "count must be >= 0");
  const CameraView& vi = scene.rig.view(view_i);
  const CameraView& vj = scene.rig.view(view_j);

  LabeledMatches out;
  out.matches.view_i = view_i;
  out.matches.view_j = view_j;

  Rng rng(seed);
  const long long max_attempts =
      std::max<long long>(1000, 1000LL * static_cast<long long>(count));
  long long attempts = 0;
  while (static_cast<int>(out.matches.size()) < count &&
         attempts < max_attempts) {
    ++attempts;
    const double x = rng.uniform(0.0, vi.intrinsics.width - 1.0);
    const double y = rng.uniform(0.0, vi.intrinsics.height - 1.0);
    const Ray ray = pixel_ray(vi.intrinsics, vi.pose, Eigen::Vector2d(x, y));
    HitRecord hit;
    if (!intersect_scene(scene, ray, &hit)) continue;
    if (!point_visible(scene, vj, hit.point)) continue;
    Projection pj;
    if (!try_project(vj.intrinsics, vj.pose, hit.point, &pj)) continue;
    out.matches.points_i.emplace_back(x, y);
    out.matches.points_j.push_back(pj.pixel);
    out.gt_depth_i.push_back(camera_depth_of(vi, hit.point));
    out.gt_depth_j.push_back(pj.depth);
  }
  if (count > 0 && out.matches.size() == 0) {
    fail("NoOverlap", "views " + std::to_string(view_i) + " and " +
                          std::to_string(view_j) +
                          " share no co-visible surface");
  }

  const size_t n = out.matches.size();
  out.is_outlier.assign(n, 0);

  // Jitter first, then replace a seeded subset of target points wholesale.
  if (noise.match_sigma > 0) {
    for (size_t t = 0; t < n; ++t) {
      auto jitter = [&](Eigen::Vector2d& p, const CameraIntrinsics& intr) {
        p.x() = std::clamp(p.x() + noise.match_sigma * rng.normal(), -1.0,
                           static_cast<double>(intr.width));
        p.y() = std::clamp(p.y() + noise.match_sigma * rng.normal(), -1.0,
                           static_cast<double>(intr.height));
      };
      jitter(out.matches.points_i[t], vi.intrinsics);
      jitter(out.matches.points_j[t], vj.intrinsics);
    }
  }
  const int n_out = static_cast<int>(
      std::lround(noise.outlier_fraction * static_cast<double>(n)));
  if (n_out > 0) {
    std::vector<size_t> ids(n);
    for (size_t t = 0; t < n; ++t) ids[t] = t;
    for (int k = 0; k < n_out; ++k) {
      const int pick = rng.uniform_int(k, static_cast<int>(n) - 1);
      std::swap(ids[static_cast<size_t>(k)], ids[static_cast<size_t>(pick)]);
      const size_t t = ids[static_cast<size_t>(k)];
      out.is_outlier[t] = 1;
      out.matches.points_j[t] =
          Eigen::Vector2d(rng.uniform(0.0, vj.intrinsics.width - 1.0),
                          rng.uniform(0.0, vj.intrinsics.height - 1.0));
    }
  }
  return out;
}

DepthMap perturb_depth(const DepthMap& depth, double relative_sigma,
                       uint64_t seed) {
  Rng rng(seed);
  DepthMap out(depth.width, depth.height);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double factor =
          std::max(1e-6, 1.0 + relative_sigma * rng.normal());
      out.set(x, y, static_cast<float>(depth.value(x, y) * factor));
    }
  }
  return out;
}

// ---- Presets ----------------------------------------------------------------

namespace {

CameraIntrinsics standard_intrinsics() {
  CameraIntrinsics intr;
  intr.fx = 200.0;
  intr.fy = 200.0;
  intr.cx = 159.5;
  intr.cy = 119.5;
  intr.width = 320;
  intr.height = 240;
  return intr;
}

CameraView forward_view(int id, const Eigen::Vector3d& eye) {
  CameraView v;
  v.view_id = id;
  v.intrinsics = standard_intrinsics();
  v.pose = look_at(eye, eye + Eigen::Vector3d(0, 0, 1),
                   Eigen::Vector3d(0, -1, 0));
  return v;
}

SyntheticScene preset_plane3view(uint64_t seed) {
  SyntheticScene scene;
  scene.name = "plane3view";
  scene.seed = seed;
  Primitive plane;
  plane.kind = PrimitiveKind::kRect;
  plane.id = 0;
  plane.center = Eigen::Vector3d(0, 0, 2);
  plane.u_axis = Eigen::Vector3d::UnitX();
  plane.v_axis = Eigen::Vector3d::UnitY();
  plane.half_u = 2.5;
  plane.half_v = 2.0;
  plane.texture.kind = TextureKind::kPlaid;
  plane.texture.scale = 3.0;
  plane.texture.color_a = Eigen::Vector3d(0.92, 0.78, 0.25);
  plane.texture.color_b = Eigen::Vector3d(0.10, 0.32, 0.70);
  scene.primitives.push_back(plane);

  scene.rig.views.push_back(forward_view(0, Eigen::Vector3d(-0.3, 0, 0)));
  scene.rig.views.push_back(forward_view(1, Eigen::Vector3d(0.0, 0, 0)));
  scene.rig.views.push_back(forward_view(2, Eigen::Vector3d(0.3, 0, 0)));
  return scene;
}

SyntheticScene preset_occluder_square(uint64_t seed) {
  SyntheticScene scene;
  scene.name = "occluder-square";
  scene.seed = seed;

  Primitive bg;
  bg.kind = PrimitiveKind::kRect;
  bg.id = 0;
  bg.center = Eigen::Vector3d(0, 0, 4);
  bg.u_axis = Eigen::Vector3d::UnitX();
  bg.v_axis = Eigen::Vector3d::UnitY();
  bg.half_u = 4.0;
  bg.half_v = 3.2;
  bg.texture.kind = TextureKind::kChecker;
  bg.texture.scale = 1.25;
  bg.texture.color_a = Eigen::Vector3d(0.82, 0.82, 0.86);
  bg.texture.color_b = Eigen::Vector3d(0.22, 0.25, 0.32);
  scene.primitives.push_back(bg);

  Primitive square;
  square.kind = PrimitiveKind::kRect;
  square.id = 1;
  square.center = Eigen::Vector3d(0, 0, 2);
  square.u_axis = Eigen::Vector3d::UnitX();
  square.v_axis = Eigen::Vector3d::UnitY();
  square.half_u = 0.4;
  square.half_v = 0.4;
  square.texture.kind = TextureKind::kPlaid;
  square.texture.scale = 8.0;
  square.texture.color_a = Eigen::Vector3d(0.95, 0.45, 0.15);
  square.texture.color_b = Eigen::Vector3d(0.35, 0.08, 0.05);
  scene.primitives.push_back(square);

  scene.rig.views.push_back(forward_view(0, Eigen::Vector3d(0.0, 0.0, 0)));
  scene.rig.views.push_back(forward_view(1, Eigen::Vector3d(0.4, 0.0, 0)));
  scene.rig.views.push_back(forward_view(2, Eigen::Vector3d(0.2, 0.1, 0)));
  return scene;
}

SyntheticScene preset_sphere_ring8(uint64_t seed) {
  SyntheticScene scene;
  scene.name = "sphere-ring-8";
  scene.seed = seed;

  Primitive ball;
  ball.kind = PrimitiveKind::kSphere;
  ball.id = 0;
  ball.center = Eigen::Vector3d::Zero();
  ball.radius = 1.2;
  ball.texture.kind = TextureKind::kPlaid;
  ball.texture.scale = 5.0;
  ball.texture.color_a = Eigen::Vector3d(0.88, 0.30, 0.25);
  ball.texture.color_b = Eigen::Vector3d(0.12, 0.45, 0.75);
  scene.primitives.push_back(ball);

  Primitive sky;
  sky.kind = PrimitiveKind::kSphere;
  sky.id = 1;
  sky.center = Eigen::Vector3d::Zero();
  sky.radius = 10.0;
  sky.texture.kind = TextureKind::kGradient;
  sky.texture.scale = 0.8;
  sky.texture.color_a = Eigen::Vector3d(0.35, 0.38, 0.45);
  sky.texture.color_b = Eigen::Vector3d(0.65, 0.62, 0.55);
  scene.primitives.push_back(sky);

  const double kTau = 2.0 * 3.14159265358979323846;
  for (int i = 0; i < 8; ++i) {
    const double a = kTau * i / 8.0;
    const Eigen::Vector3d eye(3.0 * std::cos(a), 0.0, 3.0 * std::sin(a));
    CameraView v;
    v.view_id = i;
    v.intrinsics = standard_intrinsics();
    v.pose = look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d(0, -1, 0));
    scene.rig.views.push_back(v);
  }
  return scene;
}

}  // namespace

SyntheticScene make_preset(const std::string& name, uint64_t seed) {
  if (name == "plane3view") return preset_plane3view(seed);
  if (name == "occluder-square") return preset_occluder_square(seed);
  if (name == "sphere-ring-8") return preset_sphere_ring8(seed);
  fail("ConfigOutOfRange", "unknown preset \"" + name + "\"");
}

}  // namespace sv
