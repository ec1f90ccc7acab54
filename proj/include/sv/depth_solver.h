#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sv/correspondence.h"
#include "sv/geometry.h"

namespace sv {

struct FilterConfig {
  double tau_rc = 1.0;    // reprojection error gate in pixels
  double tau_base = 0.05; // base relative-depth threshold
  double alpha = 0.1;     // sigmoid scale on the dynamic threshold
};

struct SolverConfig {
  int iterations = 2000;
  double momentum = 0.9;
  // Zero means "derive from the rig's scene diameter": step_size = 1e-2 * d,
  // z_init = d, bounds [1e-3 * d, 1e3 * d].
  double step_size = 0.0;
  double z_init = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  // Number of log-spaced candidates for the per-point initialization sweep.
  int init_sweep = 32;
};

// Solved depths for one match pair, both sides. z_i[t] is the camera-frame
// depth of points_i[t] in view_i, z_j[t] the depth of points_j[t] in
// view_j. err_* hold final reprojection error norms in pixels; rc is the
// combined bidirectional mask.
struct PairDepths {
  int view_i = -1;
  int view_j = -1;
  std::vector<Eigen::Vector2d> pixels_i;
  std::vector<Eigen::Vector2d> pixels_j;
  std::vector<double> z_i;
  std::vector<double> z_j;
  std::vector<double> err_i;
  std::vector<double> err_j;
  std::vector<uint8_t> rc;

  size_t size() const { return pixels_i.size(); }
};

// Propagation-chain masks, parallel to the chain arrays of the matching
// PropagationChainSet.
struct ChainDepths {
  int view_i = -1;
  int bridge_view_j = -1;
  int view_k = -1;
  std::vector<int> indices_ij;
  std::vector<int> indices_jk;
  std::vector<double> bridge_gap;
  std::vector<uint8_t> ppc;

  size_t size() const { return indices_ij.size(); }
};

struct SolveStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_curve;  // loss after each iteration
  int iterations = 0;
  size_t rc_pass = 0, rc_total = 0;
  size_t ppc_pass = 0, ppc_total = 0;
};

struct DepthField {
  std::vector<PairDepths> pairs;
  std::vector<ChainDepths> chains;
  SolveStats stats;

  // Canonical pair lookup (unordered); nullptr when absent.
  const PairDepths* find_pair(int view_a, int view_b) const;
};

// Residual of projecting view_i's point at depth z_i into view_j against the
// matched pixel there. Throws NonPositiveDepth when the reprojected point
// falls behind view_j (or z_i <= 0).
Eigen::Vector2d reprojection_residual(const CameraView& view_i,
                                      const CameraView& view_j,
                                      const Eigen::Vector2d& p_i, double z_i,
                                      const Eigen::Vector2d& p_j);

// Chain residual: view_i's point at depth z_a projected into view_k against
// the chain-linked pixel there. Same formula as reprojection_residual with
// the target swapped.
Eigen::Vector2d propagation_residual(const CameraView& view_i,
                                     const CameraView& view_k,
                                     const Eigen::Vector2d& p_i_a, double z_a,
                                     const Eigen::Vector2d& p_k_c);

// tau_dy = tau_base + alpha * sigmoid(2 * z_hat - 1).
double dynamic_threshold(double z_hat, const FilterConfig& config);

// Bidirectional acceptance: both reprojection errors within tau_rc and the
// relative depth difference within the dynamic threshold.
bool rc_mask(double z_ij, double z_ji, double err_ij, double err_ji,
             const FilterConfig& config, double z_hat);

// Chain acceptance: relative difference of the two bridge-linked depths
// within the dynamic threshold.
bool ppc_mask(double z_ij, double z_kj, const FilterConfig& config,
              double z_hat);

// The separable optimization problem behind solve_depths: one scalar depth
// per (pair, side, match index), where every residual term touches exactly
// one variable. Exposed so tests can check analytic gradients against
// finite differences.
class DepthProblem {
 public:
  DepthProblem(const CameraRig& rig, const MatchGraph& matches,
               const std::vector<PropagationChainSet>& chains);

  int var_count() const { return static_cast<int>(vars_.size()); }

  // Variable id for (canonical pair index, side 0 = view_i / 1 = view_j,
  // match index).
  int var_of(int pair_index, int side, int match_index) const;

  struct VarRef {
    int pair_index = -1;
    int side = 0;
    int match_index = -1;
  };
  const VarRef& var(int v) const { return vars_[v]; }

  // Sum of squared residual norms of the terms touching variable v at depth
  // z. Returns +inf when a term projects behind its target camera.
  double point_loss(int v, double z) const;

  // Analytic d(point_loss)/dz. Terms that project behind the target camera
  // contribute zero (the optimizer rejects such states via the loss).
  double point_gradient(int v, double z) const;

  // L_init = sum of point_loss over all variables.
  double total_loss(const std::vector<double>& z) const;

  // Reprojection error norm in pixels of the pair term of variable v
  // (+inf behind the camera).
  double pair_error(int v, double z) const;

  const MatchGraph& matches() const { return *matches_; }

 private:
  struct Term {
    // Projection into the target view of X(z) = origin + z * direction is
    // affine in camera coordinates: cam(z) = a + z * b.
    Eigen::Vector3d a;
    Eigen::Vector3d b;
    double fx, fy, cx, cy;
    Eigen::Vector2d target;
    bool is_pair_term = false;
  };

  double term_loss(const Term& t, double z) const;

  const CameraRig* rig_;
  const MatchGraph* matches_;
  std::vector<VarRef> vars_;
  std::vector<std::vector<int>> pair_side_offsets_;  // [pair] -> var base per side
  std::vector<Term> terms_;
  std::vector<int> term_begin_;  // terms of variable v: [term_begin_[v], term_begin_[v+1])
};

// Optimizes all per-point depths by momentum descent with per-point
// backtracking, then evaluates the outlier masks. `init` optionally supplies
// per-variable starting depths (DepthProblem variable order); otherwise each
// point is initialized by a coarse log-spaced sweep of its own loss.
// Throws EmptyMatchGraph when no matches exist.
DepthField solve_depths(const CameraRig& rig, const MatchGraph& matches,
                        const std::vector<PropagationChainSet>& chains,
                        const SolverConfig& solver, const FilterConfig& filter,
                        const std::vector<double>* init = nullptr);

}  // namespace sv
