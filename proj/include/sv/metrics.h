#ifndef SV_METRICS_H_
#define SV_METRICS_H_

#include "sv/depth_solver.h"
#include "sv/geometry.h"
#include "sv/image.h"

namespace sv {

// Total-variation smoothness: sum of |forward x-difference| +
// |forward y-difference| over all differences whose two pixels are both
// valid.
double tv_loss(const DepthMap& depth);

// Training-stage reprojection loss for one view's rendered depth: every
// mask-passing match row anchored in view_id samples the rendered depth
// bilinearly at its stored pixel and contributes the squared residual
// against its partner pixel. Rows whose sample is invalid or whose
// reprojection leaves the partner camera's front side are skipped.
double masked_reprojection_loss(const DepthMap& rendered_depth, int view_id,
                                const CameraRig& rig, const DepthField& field);

// Same contract for propagation chains anchored in view_id.
double masked_propagation_loss(const DepthMap& rendered_depth, int view_id,
                               const CameraRig& rig, const DepthField& field);

// Mean absolute difference over masked pixels and channels (0 when the mask
// is empty). mask may be null for all pixels.
double l1_loss(const Image& a, const Image& b, const Mask* mask);

// Mean L1 distance between forward-difference gradients, counting only
// differences whose two endpoint pixels are both masked-in. Invariant to a
// global intensity offset.
double grad_l1(const Image& a, const Image& b, const Mask* mask);

// Mean local SSIM (11x11 Gaussian window, sigma 1.5, C1=0.01^2, C2=0.03^2 on
// [0,1] intensities) over masked pixels, channels averaged; window weights
// are renormalized over in-bounds masked pixels. Empty mask gives 1.
double ssim(const Image& a, const Image& b, const Mask* mask);

// Pearson correlation over pixels masked-in and valid in both maps. Throws
// ZeroVariance with fewer than 2 samples or a constant sample in either map.
double pcc(const DepthMap& a, const DepthMap& b, const Mask* mask);

// Peak signal-to-noise ratio in dB over masked pixels, intensities in [0,1],
// capped at ceiling (identical inputs report the ceiling).
double psnr(const Image& a, const Image& b, const Mask* mask,
            double ceiling = 99.0);

struct LossWeights {
  double lambda = 0.8;  // L1 weight inside the color loss
  double alpha = 0.5;   // gradient weight in the virtual color loss
  double beta = 0.5;    // SSIM weight in the virtual color loss (alpha+beta=1)
};

// Everything the aggregator may consume; leave pointers null to skip a term.
struct LossInputs {
  // Color term: rendered view vs reference photo.
  const Image* rendered_image = nullptr;
  const Image* reference_image = nullptr;
  const Mask* image_mask = nullptr;  // null = all pixels

  // Depth term: rendered depth scored against the solved sparse field.
  const DepthMap* rendered_depth = nullptr;
  int view_id = -1;
  const CameraRig* rig = nullptr;
  const DepthField* field = nullptr;

  // Virtual-view terms: render at the virtual pose vs the warped view.
  const Image* virtual_rendered_image = nullptr;
  const Image* virtual_reference_image = nullptr;
  const Mask* virtual_mask = nullptr;
  const DepthMap* virtual_rendered_depth = nullptr;
  const DepthMap* virtual_reference_depth = nullptr;
};

// Aggregated objective with its full breakdown. Raw similarity scores are
// kept alongside their loss forms: l_ssim = (1 - ssim) / 2 and
// l_pcc = 1 - pcc. Absent inputs leave their fields at neutral defaults.
struct LossReport {
  double l1 = 0.0;
  double ssim = 1.0;
  double l_ssim = 0.0;
  double psnr_db = 0.0;

  double l_rc_train = 0.0;
  double l_ppc_train = 0.0;
  double l_tv = 0.0;

  double l_grad = 0.0;
  double ssim_vir = 1.0;
  double l_ssim_vir = 0.0;
  double pcc = 1.0;
  double l_pcc = 0.0;

  double l_col = 0.0;
  double l_dep = 0.0;
  double l_col_vir = 0.0;
  double l_dep_vir = 0.0;
  double total = 0.0;

  LossWeights weights;
};

// l_col     = lambda * L1 + (1 - lambda) * (1 - SSIM) / 2
// l_dep     = masked reprojection + masked propagation + TV
// l_col_vir = alpha * grad_l1 + beta * (1 - SSIM_vir) / 2
// l_dep_vir = 1 - PCC
// total     = sum of the four groups that had inputs.
LossReport total_loss(const LossInputs& inputs, const LossWeights& weights);

}  // namespace sv

#endif  // SV_METRICS_H_
