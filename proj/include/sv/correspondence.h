#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "sv/error.h"
#include "sv/geometry.h"

namespace sv {

// Dense pairwise correspondences between two views. points_i[t] in view_i
// matches points_j[t] in view_j (sub-pixel coordinates).
struct MatchSet {
  int view_i = -1;
  int view_j = -1;
  std::vector<Eigen::Vector2d> points_i;
  std::vector<Eigen::Vector2d> points_j;

  size_t size() const { return points_i.size(); }
};

struct PropagationConfig {
  double d_nn = 3.0;           // mutual-NN distance threshold in pixels
  int min_common_points = 100; // chain sets smaller than this are skipped
  int neighbor_view_limit = 0; // bridge partners per view; 0 = unlimited
};

// Indirect correspondences i -> j (bridge) -> k. Entry t links match
// indices_ij[t] of pair (i, j) with indices_jk[t] of pair (j, k) through two
// bridge points in view j that are mutual nearest neighbors, bridge_gap[t]
// pixels apart.
struct PropagationChainSet {
  int view_i = -1;
  int bridge_view_j = -1;
  int view_k = -1;
  std::vector<int> indices_ij;
  std::vector<int> indices_jk;
  std::vector<double> bridge_gap;

  size_t size() const { return indices_ij.size(); }
};

// Pairwise match storage with canonical (view_i < view_j) orientation.
class MatchGraph {
 public:
  // Canonicalizes (swapping sides when view_i > view_j) and appends.
  // Throws ConfigOutOfRange on view_i == view_j, DimensionMismatch on
  // mismatched array lengths, and ViewMismatch when the pair is present.
  void add(MatchSet set);

  const std::vector<MatchSet>& sets() const { return sets_; }
  bool empty() const { return sets_.empty(); }

  // Canonical set for the unordered pair, or nullptr.
  const MatchSet* find(int view_a, int view_b) const;

  // Copy oriented so that view_i == view_a (swaps sides when needed).
  // Throws ViewMismatch when the pair is absent.
  MatchSet oriented(int view_a, int view_b) const;

  // Sorted unique view ids present in any pair.
  std::vector<int> view_ids() const;

 private:
  std::vector<MatchSet> sets_;
};

// Exact 2-d nearest-neighbor index. Ties in distance are broken toward the
// lowest point index so queries are order-independent.
class KdTree2d {
 public:
  explicit KdTree2d(const std::vector<Eigen::Vector2d>& points);

  // Index of the nearest point (lowest index on exact ties), -1 when empty.
  // If dist_out is non-null it receives the Euclidean distance.
  int nearest(const Eigen::Vector2d& query, double* dist_out = nullptr) const;

  size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point = -1;   // index into points_
    int left = -1;
    int right = -1;
    uint8_t axis = 0;
  };

  int build(std::vector<int>& ids, int lo, int hi, int depth);
  void search(int node, const Eigen::Vector2d& query, double* best_d2,
              int* best_id) const;

  std::vector<Eigen::Vector2d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Chains pair (i, j) with pair (j, k) through mutual nearest neighbors in
// the shared bridge view j, keeping pairs closer than config.d_nn (strict).
// Throws ViewMismatch unless m_ij.view_j == m_jk.view_i.
PropagationChainSet build_chains(const MatchSet& m_ij, const MatchSet& m_jk,
                                 const PropagationConfig& config);

// Drops chain sets with fewer than config.min_common_points chains.
std::vector<PropagationChainSet> filter_chain_sets(
    std::vector<PropagationChainSet> chains, const PropagationConfig& config);

// All ordered (i, j, k) triples whose outer views i, k are among bridge j's
// per_view_limit nearest views by the warp pose-distance metric
// (translation norm + w_rot * rotation angle, w_rot = 1).
// per_view_limit <= 0 means unlimited. Throws InsufficientViews below 3.
std::vector<std::array<int, 3>> select_bridge_partners(const CameraRig& rig,
                                                       int per_view_limit);

// Convenience driver: builds chains for every bridge triple that has both
// match sets, then applies filter_chain_sets.
std::vector<PropagationChainSet> build_all_chains(
    const CameraRig& rig, const MatchGraph& matches,
    const PropagationConfig& config);

}  // namespace sv
