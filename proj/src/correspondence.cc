#include "sv/correspondence.h"

#include <algorithm>
#include <limits>
#include <string>

namespace sv {

// ---- MatchGraph -------------------------------------------------------------

void MatchGraph::add(MatchSet set) {
  if (set.view_i == set.view_j) {
    fail("ConfigOutOfRange", "match set connects a view to itself");
  }
  if (set.points_i.size() != set.points_j.size()) {
    fail("DimensionMismatch", "match point arrays differ in length");
  }
  if (set.view_i > set.view_j) {
    std::swap(set.view_i, set.view_j);
    std::swap(set.points_i, set.points_j);
  }
  if (find(set.view_i, set.view_j) != nullptr) {
    fail("ViewMismatch",
         "pair (" + std::to_string(set.view_i) + ", " +
             std::to_string(set.view_j) + ") already present");
  }
  sets_.push_back(std::move(set));
}

const MatchSet* MatchGraph::find(int view_a, int view_b) const {
  const int lo = std::min(view_a, view_b);
  const int hi = std::max(view_a, view_b);
  for (const MatchSet& s : sets_) {
    if (s.view_i == lo && s.view_j == hi) return &s;
  }
  return nullptr;
}

MatchSet MatchGraph::oriented(int view_a, int view_b) const {
  const MatchSet* s = find(view_a, view_b);
  if (!s) {
    fail("ViewMismatch",
         "no match set for pair (" + std::to_string(view_a) + ", " +
             std::to_string(view_b) + ")");
  }
  MatchSet out = *s;
  if (out.view_i != view_a) {
    std::swap(out.view_i, out.view_j);
    std::swap(out.points_i, out.points_j);
  }
  return out;
}

std::vector<int> MatchGraph::view_ids() const {
  std::vector<int> ids;
  for (const MatchSet& s : sets_) {
    ids.push_back(s.view_i);
    ids.push_back(s.view_j);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// ---- KdTree2d ---------------------------------------------------------------

KdTree2d::KdTree2d(const std::vector<Eigen::Vector2d>& points)
    : points_(points) {
  if (points_.empty()) return;
  std::vector<int> ids(points_.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  nodes_.reserve(points_.size());
  root_ = build(ids, 0, static_cast<int>(ids.size()), 0);
}

int KdTree2d::build(std::vector<int>& ids, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth & 1;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi,
                   [&](int a, int b) {
                     const double ca = points_[a](axis);
                     const double cb = points_[b](axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  Node node;
  node.point = ids[mid];
  node.axis = static_cast<uint8_t>(axis);
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(ids, lo, mid, depth + 1);
  const int right = build(ids, mid + 1, hi, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree2d::search(int node, const Eigen::Vector2d& query, double* best_d2,
                      int* best_id) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Eigen::Vector2d& p = points_[n.point];
  const double d2 = (p - query).squaredNorm();
  if (d2 < *best_d2 || (d2 == *best_d2 && n.point < *best_id)) {
    *best_d2 = d2;
    *best_id = n.point;
  }
  const double diff = query(n.axis) - p(n.axis);
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, query, best_d2, best_id);
  // <= keeps exact ties visible so the lowest-index rule is applied globally.
  if (diff * diff <= *best_d2) search(far, query, best_d2, best_id);
}

int KdTree2d::nearest(const Eigen::Vector2d& query, double* dist_out) const {
  if (root_ < 0) return -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_id = std::numeric_limits<int>::max();
  search(root_, query, &best_d2, &best_id);
  if (dist_out) *dist_out = std::sqrt(best_d2);
  return best_id;
}

// ---- Chain construction -----------------------------------------------------

PropagationChainSet build_chains(const MatchSet& m_ij, const MatchSet& m_jk,
                                 const PropagationConfig& config) {
  if (m_ij.view_j != m_jk.view_i) {
    fail("ViewMismatch",
         "bridge views differ: " + std::to_string(m_ij.view_j) + " vs " +
             std::to_string(m_jk.view_i));
  }
  PropagationChainSet chains;
  chains.view_i = m_ij.view_i;
  chains.bridge_view_j = m_ij.view_j;
  chains.view_k = m_jk.view_j;
  if (m_ij.size() == 0 || m_jk.size() == 0) return chains;

  // Bridge points: view-j side of (i,j) against view-j side of (j,k).
  const std::vector<Eigen::Vector2d>& left = m_ij.points_j;
  const std::vector<Eigen::Vector2d>& right = m_jk.points_i;
  const KdTree2d tree_right(right);
  const KdTree2d tree_left(left);

  std::vector<int> nn_lr(left.size());
  std::vector<double> dist_lr(left.size());
  for (size_t b = 0; b < left.size(); ++b) {
    nn_lr[b] = tree_right.nearest(left[b], &dist_lr[b]);
  }
  std::vector<int> nn_rl(right.size());
  for (size_t c = 0; c < right.size(); ++c) {
    nn_rl[c] = tree_left.nearest(right[c]);
  }
  for (size_t b = 0; b < left.size(); ++b) {
    const int c = nn_lr[b];
    if (c < 0) continue;
    if (nn_rl[static_cast<size_t>(c)] != static_cast<int>(b)) continue;
    if (!(dist_lr[b] < config.d_nn)) continue;
    chains.indices_ij.push_back(static_cast<int>(b));
    chains.indices_jk.push_back(c);
    chains.bridge_gap.push_back(dist_lr[b]);
  }
  return chains;
}

std::vector<PropagationChainSet> filter_chain_sets(
    std::vector<PropagationChainSet> chains, const PropagationConfig& config) {
  std::vector<PropagationChainSet> out;
  out.reserve(chains.size());
  for (PropagationChainSet& c : chains) {
    if (static_cast<int>(c.size()) >= config.min_common_points) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<std::array<int, 3>> select_bridge_partners(const CameraRig& rig,
                                                       int per_view_limit) {
  const int v = static_cast<int>(rig.views.size());
  if (v < 3) {
    fail("InsufficientViews", "bridge triples need at least 3 views");
  }
  std::vector<std::array<int, 3>> triples;
  for (int j = 0; j < v; ++j) {
    std::vector<std::pair<double, int>> ranked;  // (distance, view index)
    for (int o = 0; o < v; ++o) {
      if (o == j) continue;
      ranked.emplace_back(
          pose_distance(rig.views[j].pose, rig.views[o].pose, 1.0), o);
    }
    std::sort(ranked.begin(), ranked.end());
    int limit = per_view_limit > 0
                    ? std::min<int>(per_view_limit,
                                    static_cast<int>(ranked.size()))
                    : static_cast<int>(ranked.size());
    for (int a = 0; a < limit; ++a) {
      for (int b = 0; b < limit; ++b) {
        if (a == b) continue;
        triples.push_back({rig.views[ranked[a].second].view_id,
                           rig.views[j].view_id,
                           rig.views[ranked[b].second].view_id});
      }
    }
  }
  return triples;
}

std::vector<PropagationChainSet> build_all_chains(
    const CameraRig& rig, const MatchGraph& matches,
    const PropagationConfig& config) {
  std::vector<PropagationChainSet> chains;
  for (const std::array<int, 3>& t :
       select_bridge_partners(rig, config.neighbor_view_limit)) {
    if (!matches.find(t[0], t[1]) || !matches.find(t[1], t[2])) continue;
    chains.push_back(build_chains(matches.oriented(t[0], t[1]),
                                  matches.oriented(t[1], t[2]), config));
  }
  return filter_chain_sets(std::move(chains), config);
}

}  // namespace sv
