#include "sv/depth_align.h"

#include <algorithm>
#include <cmath>

namespace sv {

AffineDepthFit fit_scale_offset(const DepthMap& mono,
                                const SparseDepthSamples& samples,
                                int rounds, double trim_fraction) {
  if (rounds < 1) fail("ConfigOutOfRange", "rounds must be >= 1");
  if (trim_fraction < 0 || trim_fraction >= 1) {
    fail("ConfigOutOfRange", "trim_fraction must be in [0, 1)");
  }

  struct Obs {
    size_t sample;
    double m;  // bilinear mono value
    double d;  // trusted depth
  };
  std::vector<Obs> active;
  for (size_t t = 0; t < samples.size(); ++t) {
    if (!samples.mask[t]) continue;
    double m = 0.0;
    if (!bilinear_depth(mono, samples.pixels[t].x(), samples.pixels[t].y(), &m)) {
      continue;
    }
    active.push_back({t, m, samples.depths[t]});
  }
  if (active.size() < 2) {
    fail("InsufficientSamples",
         "need at least 2 masked-in samples with valid mono depth");
  }

  AffineDepthFit fit;
  for (int round = 0; round < rounds; ++round) {
    const double n = static_cast<double>(active.size());
    double sm = 0, smm = 0, sd = 0, smd = 0;
    for (const Obs& o : active) {
      sm += o.m;
      smm += o.m * o.m;
      sd += o.d;
      smd += o.m * o.d;
    }
    const double mean_m = sm / n;
    const double var_m = smm / n - mean_m * mean_m;
    if (!(var_m > 1e-14 * (1.0 + mean_m * mean_m))) {
      fail("DegenerateFit", "mono depth is constant over the samples");
    }
    const double det = n * smm - sm * sm;
    fit.scale = (n * smd - sm * sd) / det;
    fit.offset = (sd - fit.scale * sm) / n;

    if (round + 1 < rounds) {
      const size_t drop = static_cast<size_t>(
          std::floor(trim_fraction * static_cast<double>(active.size())));
      if (drop == 0 || active.size() - drop < 2) continue;
      std::vector<size_t> order(active.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      auto abs_res = [&](size_t i) {
        return std::abs(active[i].d - (fit.scale * active[i].m + fit.offset));
      };
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double ra = abs_res(a), rb = abs_res(b);
        return ra > rb || (ra == rb && a < b);
      });
      std::vector<uint8_t> dropped(active.size(), 0);
      for (size_t i = 0; i < drop; ++i) dropped[order[i]] = 1;
      std::vector<Obs> next;
      next.reserve(active.size() - drop);
      for (size_t i = 0; i < active.size(); ++i) {
        if (!dropped[i]) next.push_back(active[i]);
      }
      active = std::move(next);
    }
  }

  fit.inlier_mask.assign(samples.size(), 0);
  double ss = 0;
  for (const Obs& o : active) {
    fit.inlier_mask[o.sample] = 1;
    const double r = o.d - (fit.scale * o.m + fit.offset);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(active.size()));
  return fit;
}

DepthMap apply_affine(const DepthMap& mono, const AffineDepthFit& fit) {
  DepthMap out(mono.width, mono.height);
  for (int y = 0; y < mono.height; ++y) {
    for (int x = 0; x < mono.width; ++x) {
      if (!mono.is_valid(x, y)) continue;
      const double v = fit.scale * mono.value(x, y) + fit.offset;
      if (v > 0) out.set(x, y, static_cast<float>(v));
    }
  }
  return out;
}

SparseDepthSamples collect_view_samples(const DepthField& field, int view_id) {
  SparseDepthSamples samples;
  for (const PairDepths& p : field.pairs) {
    if (p.view_i == view_id) {
      for (size_t t = 0; t < p.size(); ++t) {
        samples.pixels.push_back(p.pixels_i[t]);
        samples.depths.push_back(p.z_i[t]);
        samples.mask.push_back(p.rc[t]);
      }
    } else if (p.view_j == view_id) {
      for (size_t t = 0; t < p.size(); ++t) {
        samples.pixels.push_back(p.pixels_j[t]);
        samples.depths.push_back(p.z_j[t]);
        samples.mask.push_back(p.rc[t]);
      }
    }
  }
  return samples;
}

}  // namespace sv
