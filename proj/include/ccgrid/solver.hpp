#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "ccgrid/common.hpp"

namespace ccgrid {

enum class ConeType {
  Zero,    // s = 0 (equality rows)
  NonNeg,  // s >= 0 (one-dimensional second-order cones)
  Soc,     // s = (t, w), t >= ||w||
  RSoc,    // s = (u, v, w), 2uv >= ||w||^2, u,v >= 0
};

struct ConeBlock {
  ConeType type = ConeType::Zero;
  int start = 0;
  int size = 0;
  std::string tag;  // constraint family, e.g. "7a" or "planted"
};

// min c^T x  s.t.  A x + s = b,  s in K (ordered product of blocks).
struct StandardForm {
  int num_vars = 0;
  Vec c;
  SpMat a;
  Vec b;
  std::vector<ConeBlock> blocks;

  int num_rows() const { return int(b.size()); }
};

struct SolveOptions {
  double abs_tol = 1e-6;
  double rel_tol = 1e-6;
  int max_iter = 200000;
  bool scaling = true;
  double time_limit_sec = 1e9;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  int check_every = 25;

  void validate() const {
    if (abs_tol <= 0 || rel_tol <= 0) throw ValidationError("tolerances must be > 0");
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct SolveReport {
  SolveStatus status = SolveStatus::IterationLimit;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  double wall_time_sec = 0.0;

  std::string status_str() const {
    switch (status) {
      case SolveStatus::Optimal: return "optimal";
      case SolveStatus::Infeasible: return "infeasible";
      case SolveStatus::Unbounded: return "unbounded";
      default: return "iteration_limit";
    }
  }
};

struct Solution {
  Vec x;
  Vec y;  // dual, in K*
  Vec s;  // slack, in K
};

namespace detail {

// project (t, w) onto the second-order cone in place
inline void project_soc(double* v, int size) {
  Eigen::Map<Vec> w(v + 1, size - 1);
  double t = v[0];
  double nw = w.norm();
  if (nw <= t) return;
  if (nw <= -t) {
    for (int i = 0; i < size; ++i) v[i] = 0.0;
    return;
  }
  double coef = 0.5 * (1.0 + t / nw);
  v[0] = coef * nw;
  w *= coef;
}

// rotated cone via the orthogonal map (u,v) -> ((u+v)/sqrt2, (u-v)/sqrt2)
inline void project_rsoc(double* v, int size) {
  const double r = 1.0 / std::sqrt(2.0);
  double u = v[0], w = v[1];
  v[0] = r * (u + w);
  v[1] = r * (u - w);
  // after the rotation the first coordinate heads a standard cone over
  // (v[1], tail)
  {
    double t = v[0];
    Eigen::Map<Vec> tail(v + 1, size - 1);
    double nw = tail.norm();
    if (nw > t) {
      if (nw <= -t) {
        for (int i = 0; i < size; ++i) v[i] = 0.0;
      } else {
        double coef = 0.5 * (1.0 + t / nw);
        v[0] = coef * nw;
        tail *= coef;
      }
    }
  }
  u = v[0];
  w = v[1];
  v[0] = r * (u + w);
  v[1] = r * (u - w);
}

inline void project_cone(Vec& s, const std::vector<ConeBlock>& blocks) {
  for (const auto& blk : blocks) {
    switch (blk.type) {
      case ConeType::Zero:
        s.segment(blk.start, blk.size).setZero();
        break;
      case ConeType::NonNeg:
        s.segment(blk.start, blk.size) = s.segment(blk.start, blk.size).cwiseMax(0.0);
        break;
      case ConeType::Soc:
        project_soc(s.data() + blk.start, blk.size);
        break;
      case ConeType::RSoc:
        project_rsoc(s.data() + blk.start, blk.size);
        break;
    }
  }
}

// distance-style violation of cone membership per block
inline double cone_violation(const Vec& s, const ConeBlock& blk) {
  switch (blk.type) {
    case ConeType::Zero:
      return s.segment(blk.start, blk.size).cwiseAbs().maxCoeff();
    case ConeType::NonNeg:
      return std::max(0.0, -s.segment(blk.start, blk.size).minCoeff());
    case ConeType::Soc: {
      double t = s[blk.start];
      double nw = s.segment(blk.start + 1, blk.size - 1).norm();
      return std::max(0.0, nw - t);
    }
    case ConeType::RSoc: {
      const double r = 1.0 / std::sqrt(2.0);
      double t = r * (s[blk.start] + s[blk.start + 1]);
      double z0 = r * (s[blk.start] - s[blk.start + 1]);
      double nw = std::sqrt(z0 * z0 + s.segment(blk.start + 2, blk.size - 2).squaredNorm());
      return std::max(0.0, nw - t);
    }
  }
  return 0.0;
}

}  // namespace detail

// Operator-splitting solver: alternating a regularized KKT solve over the
// affine set with projections onto the cone product, diagonally scaled.
// Deterministic for a fixed instance and options.
inline std::pair<Solution, SolveReport> solve(const StandardForm& inst,
                                              const SolveOptions& opts = {}) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n = inst.num_vars;
  const int m = inst.num_rows();

  // ---- scaling (Ruiz equilibration, block-uniform on cone rows) ----
  Vec d = Vec::Ones(n);   // variable scaling
  Vec e = Vec::Ones(m);   // row scaling
  double cost_scale = 1.0;
  SpMat as = inst.a;
  if (opts.scaling && m > 0 && n > 0) {
    for (int pass = 0; pass < 10; ++pass) {
      Vec col_norm = Vec::Zero(n), row_norm = Vec::Zero(m);
      for (int k = 0; k < as.outerSize(); ++k)
        for (SpMat::InnerIterator it(as, k); it; ++it) {
          double v = std::abs(it.value());
          col_norm[it.col()] = std::max(col_norm[it.col()], v);
          row_norm[it.row()] = std::max(row_norm[it.row()], v);
        }
      // rows inside one SOC block share a factor so the cone is preserved
      for (const auto& blk : inst.blocks) {
        if (blk.type == ConeType::Soc || blk.type == ConeType::RSoc) {
          double mx = row_norm.segment(blk.start, blk.size).maxCoeff();
          row_norm.segment(blk.start, blk.size).setConstant(mx);
        }
      }
      Vec dr(m), dc(n);
      for (int i = 0; i < m; ++i) dr[i] = row_norm[i] > 1e-12 ? 1.0 / std::sqrt(row_norm[i]) : 1.0;
      for (int j = 0; j < n; ++j) dc[j] = col_norm[j] > 1e-12 ? 1.0 / std::sqrt(col_norm[j]) : 1.0;
      as = dr.asDiagonal() * as * dc.asDiagonal();
      e = e.cwiseProduct(dr);
      d = d.cwiseProduct(dc);
    }
    double cn = (d.asDiagonal() * inst.c).cwiseAbs().maxCoeff();
    cost_scale = cn > 1e-12 ? 1.0 / cn : 1.0;
  }
  Vec cs = cost_scale * (d.asDiagonal() * inst.c);
  Vec bs = e.cwiseProduct(inst.b);

  // per-row penalty: equality rows get a stiffer rho
  auto rho_vec = [&](double rho) {
    Vec r = Vec::Constant(m, rho);
    for (const auto& blk : inst.blocks)
      if (blk.type == ConeType::Zero)
        r.segment(blk.start, blk.size).setConstant(rho * 1e3);
    return r;
  };
  double rho = opts.rho;
  Vec rhov = rho_vec(rho);

  // ---- KKT factorization: [[sigma I, A^T], [A, -diag(1/rho)]] ----
  Eigen::SimplicialLDLT<SpMat> ldlt;
  auto factor = [&]() {
    std::vector<Triplet> trips;
    trips.reserve(as.nonZeros() * 2 + n + m);
    for (int j = 0; j < n; ++j) trips.emplace_back(j, j, opts.sigma);
    for (int k = 0; k < as.outerSize(); ++k)
      for (SpMat::InnerIterator it(as, k); it; ++it) {
        trips.emplace_back(int(it.row()) + n, int(it.col()), it.value());
        trips.emplace_back(int(it.col()), int(it.row()) + n, it.value());
      }
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rhov[i]);
    SpMat kkt(n + m, n + m);
    kkt.setFromTriplets(trips.begin(), trips.end());
    ldlt.compute(kkt);
    if (ldlt.info() != Eigen::Success) throw SolverError("KKT factorization failed");
  };
  if (m > 0 || n > 0) factor();

  Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
  Vec x_prev = x, y_prev = y;

  SolveReport rep;
  Solution best;
  best.x = x;
  best.y = y;
  best.s = bs;
  double best_score = std::numeric_limits<double>::max();
  SolveReport best_rep = rep;

  const double inf_tol = 1e-9;
  int rho_updates = 0;

  auto unscale_x = [&](const Vec& xs) { return Vec(d.asDiagonal() * xs); };
  auto unscale_y = [&](const Vec& ys) { return Vec(e.asDiagonal() * ys / cost_scale); };
  auto unscale_s = [&](const Vec& zs) {
    Vec s = bs - zs;
    return Vec(s.cwiseQuotient(e));
  };

  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    // KKT step
    Vec rhs(n + m);
    rhs.head(n) = opts.sigma * x - cs;
    rhs.tail(m) = z - y.cwiseQuotient(rhov);
    Vec sol = ldlt.solve(rhs);
    Vec x_tilde = sol.head(n);
    Vec z_tilde = z + (sol.tail(m) - y).cwiseQuotient(rhov);

    Vec x_next = opts.alpha * x_tilde + (1.0 - opts.alpha) * x;
    Vec v = opts.alpha * z_tilde + (1.0 - opts.alpha) * z + y.cwiseQuotient(rhov);
    // z-projection onto {z : b - z in K}; the dual step is the Moreau
    // complement of the projection
    Vec s_cand = bs - v;
    detail::project_cone(s_cand, inst.blocks);
    Vec z_next = bs - s_cand;
    Vec y_next = rhov.cwiseProduct(v - z_next);

    x_prev = x;
    y_prev = y;
    x = x_next;
    z = z_next;
    y = y_next;

    const bool last = iter + 1 == opts.max_iter;
    if ((iter + 1) % opts.check_every != 0 && !last) continue;

    // unscaled residuals
    Vec xu = unscale_x(x);
    Vec yu = unscale_y(y);
    Vec su = unscale_s(z);
    Vec ax = inst.a * xu;
    Vec aty = inst.a.transpose() * yu;
    double pres = m > 0 ? (ax + su - inst.b).cwiseAbs().maxCoeff() : 0.0;
    double dres = (inst.c + aty).cwiseAbs().maxCoeff();
    double pobj = inst.c.dot(xu);
    double dobj = -inst.b.dot(yu);
    double gap = std::abs(pobj - dobj);

    double p_scale = std::max({m > 0 ? ax.cwiseAbs().maxCoeff() : 0.0,
                               m > 0 ? su.cwiseAbs().maxCoeff() : 0.0,
                               m > 0 ? inst.b.cwiseAbs().maxCoeff() : 0.0, 1.0});
    double d_scale = std::max({inst.c.cwiseAbs().maxCoeff(), aty.cwiseAbs().maxCoeff(), 1.0});
    double g_scale = std::max({std::abs(pobj), std::abs(dobj), 1.0});

    rep.iterations = iter + 1;
    rep.primal_objective = pobj;
    rep.dual_objective = dobj;
    rep.primal_residual = pres;
    rep.dual_residual = dres;
    rep.duality_gap = gap;

    double score = std::max({pres / p_scale, dres / d_scale, gap / g_scale});
    if (score < best_score) {
      best_score = score;
      best.x = xu;
      best.y = yu;
      best.s = su;
      best_rep = rep;
    }

    if (pres <= opts.abs_tol + opts.rel_tol * p_scale &&
        dres <= opts.abs_tol + opts.rel_tol * d_scale &&
        gap <= opts.abs_tol + opts.rel_tol * g_scale) {
      rep.status = SolveStatus::Optimal;
      rep.wall_time_sec =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return {Solution{xu, yu, su}, rep};
    }

    // infeasibility certificates from the iterate differences; a valid
    // Farkas vector must live in the dual cone (self-dual blocks, free on
    // equality rows)
    Vec dy = unscale_y(y) - unscale_y(y_prev);
    double dy_norm = m > 0 ? dy.cwiseAbs().maxCoeff() : 0.0;
    if (dy_norm > inf_tol) {
      Vec aty_d = inst.a.transpose() * dy;
      bool in_dual = true;
      for (const auto& blk : inst.blocks) {
        if (blk.type == ConeType::Zero) continue;
        if (detail::cone_violation(dy, blk) > 1e-7 * dy_norm) {
          in_dual = false;
          break;
        }
      }
      if (in_dual && aty_d.cwiseAbs().maxCoeff() <= 1e-7 * dy_norm &&
          inst.b.dot(dy) < -1e-7 * dy_norm) {
        rep.status = SolveStatus::Infeasible;
        rep.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return {Solution{xu, yu, su}, rep};
      }
    }
    Vec dx = unscale_x(x) - unscale_x(x_prev);
    double dx_norm = dx.cwiseAbs().maxCoeff();
    if (dx_norm > inf_tol && inst.c.dot(dx) < -1e-7 * dx_norm) {
      Vec adx = inst.a * dx;
      // A dx must point into the recession cone of the feasible set
      bool recession = true;
      for (const auto& blk : inst.blocks) {
        if (blk.type == ConeType::Zero) {
          if (adx.segment(blk.start, blk.size).cwiseAbs().maxCoeff() > 1e-7 * dx_norm)
            recession = false;
        } else {
          Vec seg = -adx.segment(blk.start, blk.size);
          ConeBlock local{blk.type, 0, blk.size, blk.tag};
          if (detail::cone_violation(seg, local) > 1e-7 * dx_norm) recession = false;
        }
        if (!recession) break;
      }
      if (recession) {
        rep.status = SolveStatus::Unbounded;
        rep.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return {Solution{xu, yu, su}, rep};
      }
    }

    // adaptive penalty
    double ratio = (pres / p_scale) / std::max(dres / d_scale, 1e-16);
    if ((ratio > 10.0 || ratio < 0.1) && rho_updates < 12) {
      rho *= std::sqrt(std::min(std::max(ratio, 1e-4), 1e4));
      rho = std::min(std::max(rho, 1e-6), 1e6);
      rhov = rho_vec(rho);
      factor();
      ++rho_updates;
    }

    if (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >
        opts.time_limit_sec)
      break;
  }

  best_rep.status = SolveStatus::IterationLimit;
  best_rep.iterations = iter;
  best_rep.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {best, best_rep};
}

// ---- independent feasibility checking ----

struct BlockViolation {
  std::string tag;
  double violation = 0.0;
};

struct CheckReport {
  bool feasible = true;
  double worst_violation = 0.0;
  std::vector<BlockViolation> by_tag;  // worst violation per tag, sorted by tag
};

// Recomputes every constraint residual from the instance data alone; never
// reads solver state.
inline CheckReport check_solution(const StandardForm& inst, const Vec& x, double tol = 1e-6) {
  if (x.size() != inst.num_vars) throw ValidationError("solution dimension mismatch");
  Vec s = inst.b - inst.a * x;
  std::map<std::string, double> worst;
  CheckReport rep;
  for (const auto& blk : inst.blocks) {
    double v = detail::cone_violation(s, blk);
    auto [it, inserted] = worst.try_emplace(blk.tag, v);
    if (!inserted) it->second = std::max(it->second, v);
    rep.worst_violation = std::max(rep.worst_violation, v);
  }
  for (const auto& [tag, v] : worst) rep.by_tag.push_back({tag, v});
  rep.feasible = rep.worst_violation <= tol;
  return rep;
}

}  // namespace ccgrid
