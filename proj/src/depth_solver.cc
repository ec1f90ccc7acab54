#include "sv/depth_solver.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sv/parallel.h"

namespace sv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const PairDepths* DepthField::find_pair(int view_a, int view_b) const {
  const int lo = std::min(view_a, view_b);
  const int hi = std::max(view_a, view_b);
  for (const PairDepths& p : pairs) {
    if (p.view_i == lo && p.view_j == hi) return &p;
  }
  return nullptr;
}

Eigen::Vector2d reprojection_residual(const CameraView& view_i,
                                      const CameraView& view_j,
                                      const Eigen::Vector2d& p_i, double z_i,
                                      const Eigen::Vector2d& p_j) {
  const Eigen::Vector3d x = back_project(view_i, p_i, z_i);
  const Projection proj = project(view_j, x);
  return proj.pixel - p_j;
}

Eigen::Vector2d propagation_residual(const CameraView& view_i,
                                     const CameraView& view_k,
                                     const Eigen::Vector2d& p_i_a, double z_a,
                                     const Eigen::Vector2d& p_k_c) {
  return reprojection_residual(view_i, view_k, p_i_a, z_a, p_k_c);
}

double dynamic_threshold(double z_hat, const FilterConfig& config) {
  const double x = 2.0 * z_hat - 1.0;
  return config.tau_base + config.alpha / (1.0 + std::exp(-x));
}

bool rc_mask(double z_ij, double z_ji, double err_ij, double err_ji,
             const FilterConfig& config, double z_hat) {
  if (!(err_ij <= config.tau_rc) || !(err_ji <= config.tau_rc)) return false;
  const double rel =
      std::abs(z_ij - z_ji) / std::min(z_ij, z_ji);
  return rel <= dynamic_threshold(z_hat, config);
}

bool ppc_mask(double z_ij, double z_kj, const FilterConfig& config,
              double z_hat) {
  const double rel = std::abs(z_ij - z_kj) / std::min(z_ij, z_kj);
  return rel <= dynamic_threshold(z_hat, config);
}

// ---- DepthProblem -----------------------------------------------------------

DepthProblem::DepthProblem(const CameraRig& rig, const MatchGraph& matches,
                           const std::vector<PropagationChainSet>& chains)
    : rig_(&rig), matches_(&matches) {
  const std::vector<MatchSet>& sets = matches.sets();

  pair_side_offsets_.resize(sets.size());
  for (size_t p = 0; p < sets.size(); ++p) {
    const int n = static_cast<int>(sets[p].size());
    pair_side_offsets_[p] = {static_cast<int>(vars_.size()),
                             static_cast<int>(vars_.size()) + n};
    for (int side = 0; side < 2; ++side) {
      for (int t = 0; t < n; ++t) {
        vars_.push_back({static_cast<int>(p), side, t});
      }
    }
  }

  // Gather terms per variable; the owning pair term always comes first.
  std::vector<std::vector<Term>> per_var(vars_.size());

  auto make_term = [&](const CameraView& src, const CameraView& dst,
                       const Eigen::Vector2d& src_pixel,
                       const Eigen::Vector2d& target, bool is_pair) {
    Term term;
    const Eigen::Vector3d center = camera_center(src.pose);
    const Eigen::Vector3d g = depth_direction(src.intrinsics, src.pose, src_pixel);
    term.a = dst.pose.rotation * center + dst.pose.translation;
    term.b = dst.pose.rotation * g;
    term.fx = dst.intrinsics.fx;
    term.fy = dst.intrinsics.fy;
    term.cx = dst.intrinsics.cx;
    term.cy = dst.intrinsics.cy;
    term.target = target;
    term.is_pair_term = is_pair;
    return term;
  };

  for (size_t p = 0; p < sets.size(); ++p) {
    const MatchSet& s = sets[p];
    const CameraView& vi = rig.view(s.view_i);
    const CameraView& vj = rig.view(s.view_j);
    for (size_t t = 0; t < s.size(); ++t) {
      per_var[static_cast<size_t>(var_of(static_cast<int>(p), 0,
                                         static_cast<int>(t)))]
          .push_back(make_term(vi, vj, s.points_i[t], s.points_j[t], true));
      per_var[static_cast<size_t>(var_of(static_cast<int>(p), 1,
                                         static_cast<int>(t)))]
          .push_back(make_term(vj, vi, s.points_j[t], s.points_i[t], true));
    }
  }

  auto canonical_pair_index = [&](int view_a, int view_b) {
    const int lo = std::min(view_a, view_b);
    const int hi = std::max(view_a, view_b);
    for (size_t p = 0; p < sets.size(); ++p) {
      if (sets[p].view_i == lo && sets[p].view_j == hi) {
        return static_cast<int>(p);
      }
    }
    return -1;
  };

  for (const PropagationChainSet& cs : chains) {
    const int pij = canonical_pair_index(cs.view_i, cs.bridge_view_j);
    const int pjk = canonical_pair_index(cs.bridge_view_j, cs.view_k);
    if (pij < 0 || pjk < 0) {
      fail("ViewMismatch", "chain set references a pair absent from the graph");
    }
    const MatchSet mij = matches.oriented(cs.view_i, cs.bridge_view_j);
    const MatchSet mjk = matches.oriented(cs.bridge_view_j, cs.view_k);
    const int side_i = sets[static_cast<size_t>(pij)].view_i == cs.view_i ? 0 : 1;
    const CameraView& view_i = rig.view(cs.view_i);
    const CameraView& view_k = rig.view(cs.view_k);
    for (size_t t = 0; t < cs.size(); ++t) {
      const int a = cs.indices_ij[t];
      const int c = cs.indices_jk[t];
      const int v = var_of(pij, side_i, a);
      per_var[static_cast<size_t>(v)].push_back(
          make_term(view_i, view_k, mij.points_i[static_cast<size_t>(a)],
                    mjk.points_j[static_cast<size_t>(c)], false));
    }
  }

  term_begin_.resize(vars_.size() + 1, 0);
  for (size_t v = 0; v < vars_.size(); ++v) {
    term_begin_[v + 1] = term_begin_[v] + static_cast<int>(per_var[v].size());
  }
  terms_.reserve(static_cast<size_t>(term_begin_.back()));
  for (auto& list : per_var) {
    for (Term& t : list) terms_.push_back(t);
  }
}

int DepthProblem::var_of(int pair_index, int side, int match_index) const {
  return pair_side_offsets_[static_cast<size_t>(pair_index)]
                           [static_cast<size_t>(side)] +
         match_index;
}

double DepthProblem::term_loss(const Term& t, double z) const {
  const double camz = t.a.z() + z * t.b.z();
  if (!(camz > kMinDepth)) return kInf;
  const double u = t.fx * (t.a.x() + z * t.b.x()) / camz + t.cx;
  const double v = t.fy * (t.a.y() + z * t.b.y()) / camz + t.cy;
  const double rx = u - t.target.x();
  const double ry = v - t.target.y();
  return rx * rx + ry * ry;
}

double DepthProblem::point_loss(int v, double z) const {
  double sum = 0.0;
  for (int i = term_begin_[v]; i < term_begin_[v + 1]; ++i) {
    sum += term_loss(terms_[static_cast<size_t>(i)], z);
  }
  return sum;
}

double DepthProblem::point_gradient(int v, double z) const {
  double grad = 0.0;
  for (int i = term_begin_[v]; i < term_begin_[v + 1]; ++i) {
    const Term& t = terms_[static_cast<size_t>(i)];
    const double camz = t.a.z() + z * t.b.z();
    if (!(camz > kMinDepth)) continue;
    const double px = t.a.x() + z * t.b.x();
    const double py = t.a.y() + z * t.b.y();
    const double u = t.fx * px / camz + t.cx;
    const double w = t.fy * py / camz + t.cy;
    const double rx = u - t.target.x();
    const double ry = w - t.target.y();
    const double inv2 = 1.0 / (camz * camz);
    const double du = t.fx * (t.b.x() * camz - px * t.b.z()) * inv2;
    const double dv = t.fy * (t.b.y() * camz - py * t.b.z()) * inv2;
    grad += 2.0 * (rx * du + ry * dv);
  }
  return grad;
}

double DepthProblem::total_loss(const std::vector<double>& z) const {
  double sum = 0.0;
  for (int v = 0; v < var_count(); ++v) {
    sum += point_loss(v, z[static_cast<size_t>(v)]);
  }
  return sum;
}

double DepthProblem::pair_error(int v, double z) const {
  for (int i = term_begin_[v]; i < term_begin_[v + 1]; ++i) {
    const Term& t = terms_[static_cast<size_t>(i)];
    if (!t.is_pair_term) continue;
    const double l = term_loss(t, z);
    return std::isfinite(l) ? std::sqrt(l) : kInf;
  }
  return kInf;
}

// ---- solve_depths -----------------------------------------------------------

DepthField solve_depths(const CameraRig& rig, const MatchGraph& matches,
                        const std::vector<PropagationChainSet>& chains,
                        const SolverConfig& solver, const FilterConfig& filter,
                        const std::vector<double>* init) {
  if (solver.iterations < 1) {
    fail("ConfigOutOfRange", "iterations must be >= 1");
  }
  if (!(filter.tau_base > 0) || !(filter.alpha >= 0) || !(filter.tau_rc > 0)) {
    fail("ConfigOutOfRange", "filter thresholds out of range");
  }
  size_t total_matches = 0;
  for (const MatchSet& s : matches.sets()) total_matches += s.size();
  if (total_matches == 0) {
    fail("EmptyMatchGraph", "no match pairs to optimize");
  }

  const DepthProblem problem(rig, matches, chains);
  const int n = problem.var_count();

  const double diam = scene_diameter(rig);
  const double step0 = solver.step_size > 0 ? solver.step_size : 1e-2 * diam;
  const double z_min = solver.z_min > 0 ? solver.z_min : 1e-3 * diam;
  const double z_max = solver.z_max > 0 ? solver.z_max : 1e3 * diam;
  if (!(z_min < z_max)) fail("ConfigOutOfRange", "need z_min < z_max");
  const double z_init =
      std::clamp(solver.z_init > 0 ? solver.z_init : diam, z_min, z_max);
  const double step_floor = 1e-14 * diam;

  std::vector<double> z(static_cast<size_t>(n), z_init);
  if (init) {
    if (static_cast<int>(init->size()) != n) {
      fail("DimensionMismatch", "init depth vector length mismatch");
    }
    for (int v = 0; v < n; ++v) {
      z[static_cast<size_t>(v)] = std::clamp((*init)[static_cast<size_t>(v)],
                                             z_min, z_max);
    }
  } else {
    // Coarse log-spaced sweep so every point starts near its own basin.
    const int sweep = std::max(2, solver.init_sweep);
    std::vector<double> candidates(static_cast<size_t>(sweep));
    const double log_lo = std::log(z_min);
    const double log_hi = std::log(z_max);
    for (int k = 0; k < sweep; ++k) {
      candidates[static_cast<size_t>(k)] =
          std::exp(log_lo + (log_hi - log_lo) * k / (sweep - 1));
    }
    parallel_for(0, n, [&](int64_t v) {
      double best_z = z_init;
      double best_l = problem.point_loss(static_cast<int>(v), z_init);
      for (const double c : candidates) {
        const double l = problem.point_loss(static_cast<int>(v), c);
        if (l < best_l) {
          best_l = l;
          best_z = c;
        }
      }
      z[static_cast<size_t>(v)] = best_z;
    });
  }

  DepthField field;
  field.stats.initial_loss = problem.total_loss(z);
  field.stats.iterations = solver.iterations;

  std::vector<double> vel(static_cast<size_t>(n), 0.0);
  std::vector<double> step(static_cast<size_t>(n), step0);
  std::vector<double> cur(static_cast<size_t>(n), 0.0);
  parallel_for(0, n, [&](int64_t v) {
    cur[static_cast<size_t>(v)] =
        problem.point_loss(static_cast<int>(v), z[static_cast<size_t>(v)]);
  });

  field.stats.loss_curve.reserve(static_cast<size_t>(solver.iterations));
  for (int iter = 0; iter < solver.iterations; ++iter) {
    parallel_for(0, n, [&](int64_t vi) {
      const size_t v = static_cast<size_t>(vi);
      if (step[v] < step_floor || cur[v] == 0.0) return;
      const double g = problem.point_gradient(static_cast<int>(vi), z[v]);
      vel[v] = solver.momentum * vel[v] - step[v] * g;
      const double z_new = std::clamp(z[v] + vel[v], z_min, z_max);
      const double l_new = problem.point_loss(static_cast<int>(vi), z_new);
      if (l_new <= cur[v]) {
        z[v] = z_new;
        cur[v] = l_new;
      } else {
        vel[v] = 0.0;
        step[v] *= 0.5;
      }
    });
    double loss = 0.0;
    for (int v = 0; v < n; ++v) loss += cur[static_cast<size_t>(v)];
    field.stats.loss_curve.push_back(loss);
  }
  field.stats.final_loss = problem.total_loss(z);

  // ---- extract depths and evaluate masks ----
  const std::vector<MatchSet>& sets = matches.sets();
  field.pairs.resize(sets.size());
  for (size_t p = 0; p < sets.size(); ++p) {
    const MatchSet& s = sets[p];
    PairDepths& out = field.pairs[p];
    out.view_i = s.view_i;
    out.view_j = s.view_j;
    out.pixels_i = s.points_i;
    out.pixels_j = s.points_j;
    const size_t count = s.size();
    out.z_i.resize(count);
    out.z_j.resize(count);
    out.err_i.resize(count);
    out.err_j.resize(count);
    out.rc.assign(count, 0);
    for (size_t t = 0; t < count; ++t) {
      const int v0 = problem.var_of(static_cast<int>(p), 0, static_cast<int>(t));
      const int v1 = problem.var_of(static_cast<int>(p), 1, static_cast<int>(t));
      out.z_i[t] = z[static_cast<size_t>(v0)];
      out.z_j[t] = z[static_cast<size_t>(v1)];
      out.err_i[t] = problem.pair_error(v0, out.z_i[t]);
      out.err_j[t] = problem.pair_error(v1, out.z_j[t]);
    }
  }

  // Per-view min/max depth over error-passing points normalizes the sigmoid
  // argument of the dynamic threshold.
  std::map<int, std::pair<double, double>> view_range;
  auto feed_range = [&](int view, double depth, double err) {
    if (!(err <= filter.tau_rc)) return;
    auto it = view_range.find(view);
    if (it == view_range.end()) {
      view_range.emplace(view, std::make_pair(depth, depth));
    } else {
      it->second.first = std::min(it->second.first, depth);
      it->second.second = std::max(it->second.second, depth);
    }
  };
  for (const PairDepths& p : field.pairs) {
    for (size_t t = 0; t < p.size(); ++t) {
      feed_range(p.view_i, p.z_i[t], p.err_i[t]);
      feed_range(p.view_j, p.z_j[t], p.err_j[t]);
    }
  }
  auto z_hat = [&](int view, double depth) {
    const auto it = view_range.find(view);
    if (it == view_range.end()) return 0.5;
    const double lo = it->second.first;
    const double hi = it->second.second;
    if (hi - lo < 1e-12) return 0.5;
    return std::clamp((depth - lo) / (hi - lo), 0.0, 1.0);
  };

  for (PairDepths& p : field.pairs) {
    for (size_t t = 0; t < p.size(); ++t) {
      p.rc[t] = rc_mask(p.z_i[t], p.z_j[t], p.err_i[t], p.err_j[t], filter,
                        z_hat(p.view_i, p.z_i[t]))
                    ? 1
                    : 0;
      field.stats.rc_pass += p.rc[t];
    }
    field.stats.rc_total += p.size();
  }

  field.chains.resize(chains.size());
  for (size_t c = 0; c < chains.size(); ++c) {
    const PropagationChainSet& cs = chains[c];
    ChainDepths& out = field.chains[c];
    out.view_i = cs.view_i;
    out.bridge_view_j = cs.bridge_view_j;
    out.view_k = cs.view_k;
    out.indices_ij = cs.indices_ij;
    out.indices_jk = cs.indices_jk;
    out.bridge_gap = cs.bridge_gap;
    out.ppc.assign(cs.size(), 0);

    const PairDepths* pij = field.find_pair(cs.view_i, cs.bridge_view_j);
    const PairDepths* pjk = field.find_pair(cs.bridge_view_j, cs.view_k);
    for (size_t t = 0; t < cs.size(); ++t) {
      const size_t a = static_cast<size_t>(cs.indices_ij[t]);
      const size_t b = static_cast<size_t>(cs.indices_jk[t]);
      const double z_ij =
          cs.view_i == pij->view_i ? pij->z_i[a] : pij->z_j[a];
      const double z_kj =
          cs.view_k == pjk->view_i ? pjk->z_i[b] : pjk->z_j[b];
      out.ppc[t] =
          ppc_mask(z_ij, z_kj, filter, z_hat(cs.view_i, z_ij)) ? 1 : 0;
      field.stats.ppc_pass += out.ppc[t];
    }
    field.stats.ppc_total += cs.size();
  }

  return field;
}

}  // namespace sv
