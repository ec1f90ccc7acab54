#include "sv/occlusion.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "sv/error.h"
#include "sv/io.h"
#include "sv/parallel.h"

namespace sv {

FloatMap sobel_magnitude(const DepthMap& depth) {
  const int w = depth.width;
  const int h = depth.height;
  FloatMap mag(w, h, 0.0f);
  auto sample = [&](int x, int y) -> double {
    return depth.value(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  parallel_for(0, h, [&](int64_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const double gx = -sample(x - 1, y - 1) + sample(x + 1, y - 1) -
                        2.0 * sample(x - 1, y) + 2.0 * sample(x + 1, y) -
                        sample(x - 1, y + 1) + sample(x + 1, y + 1);
      const double gy = -sample(x - 1, y - 1) - 2.0 * sample(x, y - 1) -
                        sample(x + 1, y - 1) + sample(x - 1, y + 1) +
                        2.0 * sample(x, y + 1) + sample(x + 1, y + 1);
      mag.at(x, y) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  });
  float peak = 0.0f;
  for (const float v : mag.data) peak = std::max(peak, v);
  if (peak > 0.0f) {
    for (float& v : mag.data) v /= peak;
  }
  return mag;
}

IndexMap slice_depth(const DepthMap& depth, int n) {
  if (n < 2) fail("ConfigOutOfRange", "n_slices must be >= 2");
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double d = depth.value(x, y);
      d_min = std::min(d_min, d);
      d_max = std::max(d_max, d);
    }
  }
  if (!(d_min < d_max)) {
    fail("DegenerateRange", "depth slicing needs a non-constant valid range");
  }
  const double width = (d_max - d_min) / n;
  IndexMap index(depth.width, depth.height, -1);
  parallel_for(0, depth.height, [&](int64_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const int bin = static_cast<int>(
          std::floor((depth.value(x, y) - d_min) / width));
      index.at(x, y) = std::clamp(bin, 0, n - 1);
    }
  });
  return index;
}

namespace {

// 8-connected components over set pixels; labels are assigned in scan order.
// Returns the number of components and fills `label` (-1 outside the set).
int connected_components(const Mask& set, IndexMap* label) {
  *label = IndexMap(set.width, set.height, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int sy = 0; sy < set.height; ++sy) {
    for (int sx = 0; sx < set.width; ++sx) {
      if (!set.at(sx, sy) || label->at(sx, sy) >= 0) continue;
      stack.push_back({sx, sy});
      label->at(sx, sy) = next;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (!set.in_bounds(nx, ny) || !set.at(nx, ny) ||
                label->at(nx, ny) >= 0) {
              continue;
            }
            label->at(nx, ny) = next;
            stack.push_back({nx, ny});
          }
        }
      }
      ++next;
    }
  }
  return next;
}

}  // namespace

OcclusionMaskSet local_foreground_mask(const DepthMap& depth,
                                       const OcclusionConfig& config) {
  if (config.n_slices < 2) fail("ConfigOutOfRange", "n_slices must be >= 2");
  if (config.edge_threshold <= 0.0 || config.edge_threshold >= 1.0) {
    fail("ConfigOutOfRange", "edge_threshold must lie in (0, 1)");
  }
  if (config.min_region_area < 0) {
    fail("ConfigOutOfRange", "min_region_area must be >= 0");
  }

  OcclusionMaskSet out;
  out.edge_map = sobel_magnitude(depth);
  out.local_fg = Mask(depth.width, depth.height, 0);
  out.slice_mask = Mask(depth.width, depth.height, 0);

  // A flat or empty map carries no slice structure and no edges; report
  // everything-empty rather than failing.
  bool sliced = true;
  try {
    out.slice_index = slice_depth(depth, config.n_slices);
  } catch (const Error& e) {
    if (e.code() != std::string("DegenerateRange")) throw;
    out.slice_index = IndexMap(depth.width, depth.height, -1);
    sliced = false;
  }
  if (!sliced) return out;

  Mask candidates(depth.width, depth.height, 0);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (depth.is_valid(x, y) &&
          out.edge_map.at(x, y) > config.edge_threshold) {
        candidates.at(x, y) = 1;
      }
    }
  }

  IndexMap label;
  const int n_components = connected_components(candidates, &label);
  if (n_components == 0) return out;

  std::vector<int64_t> area(static_cast<size_t>(n_components), 0);
  std::vector<PixelRect> rects(static_cast<size_t>(n_components));
  for (auto& r : rects) {
    r.x0 = depth.width;
    r.y0 = depth.height;
  }
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const int c = label.at(x, y);
      if (c < 0) continue;
      ++area[static_cast<size_t>(c)];
      PixelRect& r = rects[static_cast<size_t>(c)];
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x);
      r.y1 = std::max(r.y1, y);
    }
  }
  std::vector<uint8_t> keep(static_cast<size_t>(n_components), 0);
  for (int c = 0; c < n_components; ++c) {
    keep[static_cast<size_t>(c)] =
        area[static_cast<size_t>(c)] >= config.min_region_area ? 1 : 0;
  }

  // Each surviving edge pixel votes for the layer of the nearest (smallest)
  // valid depth in its 3x3 window — the near side of the depth step.
  std::vector<int64_t> votes(static_cast<size_t>(config.n_slices), 0);
  bool any_vote = false;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const int c = label.at(x, y);
      if (c < 0 || !keep[static_cast<size_t>(c)]) continue;
      double near_depth = std::numeric_limits<double>::infinity();
      int near_bin = -1;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (!depth.in_bounds(nx, ny) || !depth.is_valid(nx, ny)) {
            continue;
          }
          const double d = depth.value(nx, ny);
          if (d < near_depth) {
            near_depth = d;
            near_bin = out.slice_index.at(nx, ny);
          }
        }
      }
      if (near_bin >= 0) {
        ++votes[static_cast<size_t>(near_bin)];
        any_vote = true;
      }
    }
  }
  if (!any_vote) return out;

  int fg = 0;
  for (int b = 1; b < config.n_slices; ++b) {
    if (votes[static_cast<size_t>(b)] > votes[static_cast<size_t>(fg)]) {
      fg = b;
    }
  }
  out.fg_slice = fg;
  for (int c = 0; c < n_components; ++c) {
    if (keep[static_cast<size_t>(c)]) {
      out.rects.push_back(rects[static_cast<size_t>(c)]);
    }
  }

  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const int s = out.slice_index.at(x, y);
      if (s < 0 || s > fg) continue;
      out.slice_mask.at(x, y) = 1;
      for (const PixelRect& r : out.rects) {
        if (r.contains(x, y)) {
          out.local_fg.at(x, y) = 1;
          break;
        }
      }
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> filter_background_points(
    const std::vector<Eigen::Vector3d>& points, const OcclusionMaskSet& masks,
    const CameraView& cam, std::vector<size_t>* kept_indices) {
  if (kept_indices) kept_indices->clear();
  std::vector<Eigen::Vector3d> kept;
  kept.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    Projection proj;
    bool reject = false;
    if (try_project(cam.intrinsics, cam.pose, points[i], &proj)) {
      const int x = static_cast<int>(std::lround(proj.pixel.x()));
      const int y = static_cast<int>(std::lround(proj.pixel.y()));
      if (masks.local_fg.in_bounds(x, y) && masks.local_fg.at(x, y) &&
          masks.slice_mask.at(x, y)) {
        reject = true;
      }
    }
    if (!reject) {
      kept.push_back(points[i]);
      if (kept_indices) kept_indices->push_back(i);
    }
  }
  return kept;
}

Image inpaint_diffusion(const Image& image, const Mask& mask, double tol,
                        int max_sweeps) {
  require_same_size(image.width, image.height, mask.width, mask.height);
  if (tol <= 0.0 || max_sweeps < 1) {
    fail("ConfigOutOfRange", "inpainting needs tol > 0 and max_sweeps >= 1");
  }

  std::vector<int> hole;  // flat pixel indices
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) hole.push_back(y * mask.width + x);
    }
  }
  Image out = image;
  if (hole.empty()) return out;

  // Start the hole at the unmasked mean so diffusion converges from a
  // sensible constant rather than stale content.
  double mean[3] = {0.5, 0.5, 0.5};
  const int64_t total = static_cast<int64_t>(mask.width) * mask.height;
  const int64_t free_count = total - static_cast<int64_t>(hole.size());
  if (free_count > 0) {
    double sum[3] = {0, 0, 0};
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (mask.at(x, y)) continue;
        for (int c = 0; c < 3; ++c) sum[c] += image.at(x, y, c);
      }
    }
    for (int c = 0; c < 3; ++c) mean[c] = sum[c] / static_cast<double>(free_count);
  }
  for (const int idx : hole) {
    const int x = idx % mask.width;
    const int y = idx / mask.width;
    for (int c = 0; c < 3; ++c) {
      out.at(x, y, c) = static_cast<float>(mean[c]);
    }
  }

  Image next = out;
  std::vector<float> delta(hole.size(), 0.0f);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    parallel_for(0, static_cast<int64_t>(hole.size()), [&](int64_t hi) {
      const int idx = hole[static_cast<size_t>(hi)];
      const int x = idx % mask.width;
      const int y = idx / mask.width;
      float worst = 0.0f;
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        int count = 0;
        if (x > 0) { sum += out.at(x - 1, y, c); ++count; }
        if (x + 1 < mask.width) { sum += out.at(x + 1, y, c); ++count; }
        if (y > 0) { sum += out.at(x, y - 1, c); ++count; }
        if (y + 1 < mask.height) { sum += out.at(x, y + 1, c); ++count; }
        const float value =
            count > 0 ? static_cast<float>(sum / count) : out.at(x, y, c);
        worst = std::max(worst, std::abs(value - out.at(x, y, c)));
        next.at(x, y, c) = value;
      }
      delta[static_cast<size_t>(hi)] = worst;
    });
    for (const int idx : hole) {
      const int x = idx % mask.width;
      const int y = idx / mask.width;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = next.at(x, y, c);
    }
    float max_change = 0.0f;
    for (const float d : delta) max_change = std::max(max_change, d);
    if (max_change < tol) break;
  }
  return out;
}

Image DiffusionInpainter::inpaint(const Image& image, const Mask& mask) const {
  return inpaint_diffusion(image, mask);
}

ExternalInpainter::ExternalInpainter(std::string command)
    : command_(std::move(command)) {
  if (command_.empty()) {
    fail("ConfigOutOfRange", "external inpainter needs a command");
  }
}

Image ExternalInpainter::inpaint(const Image& image, const Mask& mask) const {
  require_same_size(image.width, image.height, mask.width, mask.height);
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() /
      ("sv_inpaint_" + std::to_string(static_cast<long long>(getpid())));
  fs::create_directories(dir);
  const std::string in_png = (dir / "in.png").string();
  const std::string mask_png = (dir / "mask.png").string();
  const std::string out_png = (dir / "out.png").string();
  write_png_rgb(in_png, image);
  write_png_mask(mask_png, mask);
  const std::string cmd = command_ + " " + in_png + " " + mask_png + " " +
                          out_png;
  const int status = std::system(cmd.c_str());
  if (status != 0) {
    fail("IoError", "external inpainter exited with status " +
                        std::to_string(status));
  }
  Image result = read_png_rgb(out_png);
  require_same_size(result.width, result.height, image.width, image.height);
  // The backend owns only the hole; everything else reverts to the input.
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) result.at(x, y, c) = image.at(x, y, c);
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return result;
}

std::unique_ptr<Inpainter> make_inpainter(const std::string& spec) {
  if (spec.empty() || spec == "diffusion") {
    return std::make_unique<DiffusionInpainter>();
  }
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0) {
    return std::make_unique<ExternalInpainter>(spec.substr(prefix.size()));
  }
  fail("ConfigOutOfRange",
       "inpainter must be \"diffusion\" or \"external:<command>\"");
}

}  // namespace sv
