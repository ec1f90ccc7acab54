#include "sv/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "sv/error.h"
#include "sv/parallel.h"

namespace sv {

double tv_loss(const DepthMap& depth) {
  double sum = 0.0;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double d = depth.value(x, y);
      if (x + 1 < depth.width && depth.is_valid(x + 1, y)) {
        sum += std::abs(depth.value(x + 1, y) - d);
      }
      if (y + 1 < depth.height && depth.is_valid(x, y + 1)) {
        sum += std::abs(depth.value(x, y + 1) - d);
      }
    }
  }
  return sum;
}

namespace {

// Accumulates one residual term if the depth sample and the reprojection are
// both usable; silently skips otherwise (the masks already gate inclusion).
void add_residual(const DepthMap& rendered, const CameraView& src,
                  const CameraView& dst, const Eigen::Vector2d& p_src,
                  const Eigen::Vector2d& p_dst, double* sum) {
  double z = 0.0;
  if (!bilinear_depth(rendered, p_src.x(), p_src.y(), &z)) return;
  try {
    *sum += reprojection_residual(src, dst, p_src, z, p_dst).squaredNorm();
  } catch (const Error& e) {
    if (e.code() != "NonPositiveDepth") throw;
  }
}

// Pixel of a chain endpoint: pair `pd` stores the chain view on side i or j.
const Eigen::Vector2d& side_pixel(const PairDepths& pd, int view, int index) {
  return pd.view_i == view ? pd.pixels_i[static_cast<size_t>(index)]
                           : pd.pixels_j[static_cast<size_t>(index)];
}

}  // namespace

double masked_reprojection_loss(const DepthMap& rendered_depth, int view_id,
                                const CameraRig& rig,
                                const DepthField& field) {
  const CameraView& src = rig.view(view_id);
  double sum = 0.0;
  for (const PairDepths& pd : field.pairs) {
    if (pd.view_i != view_id && pd.view_j != view_id) continue;
    const bool on_i = pd.view_i == view_id;
    const CameraView& dst = rig.view(on_i ? pd.view_j : pd.view_i);
    for (size_t t = 0; t < pd.size(); ++t) {
      if (!pd.rc[t]) continue;
      const Eigen::Vector2d& p_src = on_i ? pd.pixels_i[t] : pd.pixels_j[t];
      const Eigen::Vector2d& p_dst = on_i ? pd.pixels_j[t] : pd.pixels_i[t];
      add_residual(rendered_depth, src, dst, p_src, p_dst, &sum);
    }
  }
  return sum;
}

double masked_propagation_loss(const DepthMap& rendered_depth, int view_id,
                               const CameraRig& rig, const DepthField& field) {
  const CameraView& src = rig.view(view_id);
  double sum = 0.0;
  for (const ChainDepths& cd : field.chains) {
    if (cd.view_i != view_id) continue;
    const PairDepths* pij = field.find_pair(cd.view_i, cd.bridge_view_j);
    const PairDepths* pjk = field.find_pair(cd.bridge_view_j, cd.view_k);
    if (!pij || !pjk) {
      fail("ViewMismatch", "chain references a pair missing from the field");
    }
    const CameraView& dst = rig.view(cd.view_k);
    for (size_t t = 0; t < cd.size(); ++t) {
      if (!cd.ppc[t]) continue;
      const Eigen::Vector2d& p_src =
          side_pixel(*pij, cd.view_i, cd.indices_ij[t]);
      const Eigen::Vector2d& p_dst =
          side_pixel(*pjk, cd.view_k, cd.indices_jk[t]);
      add_residual(rendered_depth, src, dst, p_src, p_dst, &sum);
    }
  }
  return sum;
}

namespace {

bool masked_at(const Mask* mask, int x, int y) {
  return mask == nullptr || mask->at(x, y) != 0;
}

void require_images_match(const Image& a, const Image& b, const Mask* mask) {
  require_same_size(a.width, a.height, b.width, b.height);
  if (mask) require_same_size(a.width, a.height, mask->width, mask->height);
}

}  // namespace

double l1_loss(const Image& a, const Image& b, const Mask* mask) {
  require_images_match(a, b, mask);
  double sum = 0.0;
  int64_t count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        sum += std::abs(static_cast<double>(a.at(x, y, c)) - b.at(x, y, c));
      }
      count += 3;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double grad_l1(const Image& a, const Image& b, const Mask* mask) {
  require_images_match(a, b, mask);
  double sum = 0.0;
  int64_t count = 0;
  auto add = [&](int x0, int y0, int x1, int y1) {
    if (!masked_at(mask, x0, y0) || !masked_at(mask, x1, y1)) return;
    for (int c = 0; c < 3; ++c) {
      const double ga = static_cast<double>(a.at(x1, y1, c)) - a.at(x0, y0, c);
      const double gb = static_cast<double>(b.at(x1, y1, c)) - b.at(x0, y0, c);
      sum += std::abs(ga - gb);
    }
    count += 3;
  };
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (x + 1 < a.width) add(x, y, x + 1, y);
      if (y + 1 < a.height) add(x, y, x, y + 1);
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

constexpr int kSsimRadius = 5;  // 11x11 window

const std::array<double, 11>& ssim_window() {
  static const std::array<double, 11> w = [] {
    std::array<double, 11> out{};
    const double sigma = 1.5;
    for (int i = 0; i < 11; ++i) {
      const double d = i - kSsimRadius;
      out[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return out;
  }();
  return w;
}

}  // namespace

double ssim(const Image& a, const Image& b, const Mask* mask) {
  require_images_match(a, b, mask);
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const std::array<double, 11>& window = ssim_window();

  FloatMap per_pixel(a.width, a.height, 0.0f);
  parallel_for(0, a.height, [&](int64_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y)) continue;
      double value = 0.0;
      for (int c = 0; c < 3; ++c) {
        double wsum = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -kSsimRadius; dy <= kSsimRadius; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= a.height) continue;
          const double wy = window[static_cast<size_t>(dy + kSsimRadius)];
          for (int dx = -kSsimRadius; dx <= kSsimRadius; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= a.width) continue;
            if (!masked_at(mask, xx, yy)) continue;
            const double w =
                wy * window[static_cast<size_t>(dx + kSsimRadius)];
            const double va = a.at(xx, yy, c);
            const double vb = b.at(xx, yy, c);
            wsum += w;
            sa += w * va;
            sb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double mu_a = sa / wsum;
        const double mu_b = sb / wsum;
        const double var_a = saa / wsum - mu_a * mu_a;
        const double var_b = sbb / wsum - mu_b * mu_b;
        const double cov = sab / wsum - mu_a * mu_b;
        value += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                 ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
      }
      per_pixel.at(x, y) = static_cast<float>(value / 3.0);
    }
  });

  double sum = 0.0;
  int64_t count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y)) continue;
      sum += per_pixel.at(x, y);
      ++count;
    }
  }
  return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

double pcc(const DepthMap& a, const DepthMap& b, const Mask* mask) {
  require_same_size(a.width, a.height, b.width, b.height);
  if (mask) require_same_size(a.width, a.height, mask->width, mask->height);
  double sum_a = 0.0, sum_b = 0.0;
  int64_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y) || !a.is_valid(x, y) || !b.is_valid(x, y)) {
        continue;
      }
      sum_a += a.value(x, y);
      sum_b += b.value(x, y);
      ++n;
    }
  }
  if (n < 2) {
    fail("ZeroVariance", "correlation needs at least 2 shared valid pixels");
  }
  const double mean_a = sum_a / static_cast<double>(n);
  const double mean_b = sum_b / static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y) || !a.is_valid(x, y) || !b.is_valid(x, y)) {
        continue;
      }
      const double da = a.value(x, y) - mean_a;
      const double db = b.value(x, y) - mean_b;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    fail("ZeroVariance", "correlation is undefined for a constant depth map");
  }
  return sab / std::sqrt(saa * sbb);
}

double psnr(const Image& a, const Image& b, const Mask* mask, double ceiling) {
  require_images_match(a, b, mask);
  if (ceiling <= 0.0) fail("ConfigOutOfRange", "psnr ceiling must be > 0");
  double sum = 0.0;
  int64_t count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!masked_at(mask, x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sum += d * d;
      }
      count += 3;
    }
  }
  if (count == 0) return ceiling;
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return ceiling;
  return std::min(ceiling, 10.0 * std::log10(1.0 / mse));
}

LossReport total_loss(const LossInputs& inputs, const LossWeights& weights) {
  if (weights.lambda < 0.0 || weights.lambda > 1.0) {
    fail("ConfigOutOfRange", "lambda must lie in [0, 1]");
  }
  if (weights.alpha < 0.0 || weights.beta < 0.0 ||
      std::abs(weights.alpha + weights.beta - 1.0) > 1e-9) {
    fail("ConfigOutOfRange", "alpha and beta must be >= 0 and sum to 1");
  }

  LossReport report;
  report.weights = weights;

  if (inputs.rendered_image && inputs.reference_image) {
    report.l1 =
        l1_loss(*inputs.rendered_image, *inputs.reference_image,
                inputs.image_mask);
    report.ssim = ssim(*inputs.rendered_image, *inputs.reference_image,
                       inputs.image_mask);
    report.l_ssim = (1.0 - report.ssim) / 2.0;
    report.psnr_db = psnr(*inputs.rendered_image, *inputs.reference_image,
                          inputs.image_mask);
    report.l_col =
        weights.lambda * report.l1 + (1.0 - weights.lambda) * report.l_ssim;
  }

  if (inputs.rendered_depth) {
    if (inputs.rig && inputs.field && inputs.view_id >= 0) {
      report.l_rc_train = masked_reprojection_loss(
          *inputs.rendered_depth, inputs.view_id, *inputs.rig, *inputs.field);
      report.l_ppc_train = masked_propagation_loss(
          *inputs.rendered_depth, inputs.view_id, *inputs.rig, *inputs.field);
    }
    report.l_tv = tv_loss(*inputs.rendered_depth);
    report.l_dep = report.l_rc_train + report.l_ppc_train + report.l_tv;
  }

  if (inputs.virtual_rendered_image && inputs.virtual_reference_image) {
    report.l_grad =
        grad_l1(*inputs.virtual_rendered_image,
                *inputs.virtual_reference_image, inputs.virtual_mask);
    report.ssim_vir =
        ssim(*inputs.virtual_rendered_image, *inputs.virtual_reference_image,
             inputs.virtual_mask);
    report.l_ssim_vir = (1.0 - report.ssim_vir) / 2.0;
    report.l_col_vir =
        weights.alpha * report.l_grad + weights.beta * report.l_ssim_vir;
  }

  if (inputs.virtual_rendered_depth && inputs.virtual_reference_depth) {
    report.pcc = pcc(*inputs.virtual_rendered_depth,
                     *inputs.virtual_reference_depth, inputs.virtual_mask);
    report.l_pcc = 1.0 - report.pcc;
    report.l_dep_vir = report.l_pcc;
  }

  report.total =
      report.l_col + report.l_dep + report.l_col_vir + report.l_dep_vir;
  return report;
}

}  // namespace sv
