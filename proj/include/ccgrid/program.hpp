#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ccgrid/quadfit.hpp"
#include "ccgrid/solver.hpp"
#include "ccgrid/storage.hpp"
#include "ccgrid/uncertainty.hpp"

namespace ccgrid {

// Index map over the decision variables of the scenario program. Base
// dispatch, the storage schedule and the epigraph scalar are shared across
// scenarios; voltages and branch flows are scenario-indexed.
struct DecisionLayout {
  int n = 0, n_gen = 0, n_es = 0, n_lines = 0, T = 0, S = 0;

  int gen_p(int g, int t) const { return (g * T + t); }
  int gen_q(int g, int t) const { return n_gen * T + (g * T + t); }
  int es_p(int u, int t) const { return 2 * n_gen * T + (u * T + t); }
  int es_q(int u, int t) const { return 2 * n_gen * T + n_es * T + (u * T + t); }
  int es_loss(int u, int t) const { return 2 * n_gen * T + 2 * n_es * T + (u * T + t); }
  int z() const { return 2 * n_gen * T + 3 * n_es * T; }
  int volt(int s, int t, int coord) const {
    return scenario_base() + s * scenario_size() + t * 2 * n + coord;
  }
  int flow_p(int s, int l, int t) const {
    return scenario_base() + s * scenario_size() + T * 2 * n + (l * T + t);
  }
  int flow_q(int s, int l, int t) const {
    return scenario_base() + s * scenario_size() + T * 2 * n + n_lines * T + (l * T + t);
  }

  int scenario_base() const { return 2 * n_gen * T + 3 * n_es * T + 1; }
  int scenario_size() const { return T * (2 * n + 2 * n_lines); }
  int total_variables() const { return scenario_base() + S * scenario_size(); }

  // The canonical decision dimension d' fed to the sample-size rules: one
  // copy of the per-period state (voltages and flows) plus the dispatch, the
  // convention under which the 5-bus 24-hour system measures 864.
  long long decision_dimension() const {
    return (long long)T * (2 * n + 2 * n_lines + 2 * n_gen + 2 * n_es);
  }
};

// Intermediate conic program: linear rows, PSD-quadratic inequalities and
// second-order cone constraints, each carrying its constraint-family tag.
struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
  bool equality = false;
  std::string tag;
};

struct QuadConstraint {
  // z^T Q z + lin^T x + constant <= 0, z = x[qvars], Q PSD
  std::vector<int> qvars;
  Mat q;
  std::vector<std::pair<int, double>> lin;
  double constant = 0.0;
  std::string tag;
};

struct SocConstraint {
  // || rows(x) || <= bound(x): each row is an affine expression
  std::vector<std::vector<std::pair<int, double>>> arg_rows;
  std::vector<double> arg_consts;
  std::vector<std::pair<int, double>> bound;
  double bound_const = 0.0;
  std::string tag;
};

struct ConicProgram {
  DecisionLayout layout;
  std::vector<double> objective;  // linear objective over the layout
  // $/h per objective unit: cost rows are normalized so that their
  // coefficients live on the same scale as the pu quantities
  double cost_scale = 1.0;
  std::vector<LinearRow> linear;
  std::vector<QuadConstraint> quads;
  std::vector<SocConstraint> socs;

  std::set<std::string> tags() const {
    std::set<std::string> t;
    for (const auto& r : linear) t.insert(r.tag);
    for (const auto& q : quads) t.insert(q.tag);
    for (const auto& s : socs) t.insert(s.tag);
    return t;
  }
};

struct AssembleOptions {
  bool energy_bounds_per_scenario = true;
  HullVariant hull_variant = HullVariant::RScaled;
};

// Assemble the convexified multi-period scenario program: surrogate
// power-flow inequalities, storage hull, operating limits and the epigraph
// objective, instantiated at every selected scenario with affine recourse.
//
// Sign note: the sampled forecast errors are load-positive (realized load =
// forecast + dp). Units respond against the generation-side imbalance, so a
// unit with factor w moves by +w * sum(dp) when load rises.
inline ConicProgram assemble(const NetworkCase& nc, const ModelRegistry& reg,
                             const std::vector<ScenarioSample>& scenarios,
                             const RecourseScheme& scheme,
                             const AssembleOptions& opts = {}) {
  if (scenarios.empty()) throw ValidationError("scenario set is empty");
  if (reg.n != nc.n() || reg.n_lines != int(nc.branches.size()))
    throw ValidationError("model registry does not match the case");

  ConicProgram prog;
  auto& L = prog.layout;
  L.n = nc.n();
  L.n_gen = int(nc.generators.size());
  L.n_es = int(nc.storage_units.size());
  L.n_lines = int(nc.branches.size());
  L.T = nc.period_count;
  L.S = int(scenarios.size());

  prog.objective.assign(L.total_variables(), 0.0);
  prog.objective[L.z()] = 1.0;  // minimize the epigraph scalar

  // generators and storage units attached to each bus
  std::vector<std::vector<int>> gens_at(L.n), es_at(L.n);
  for (int g = 0; g < L.n_gen; ++g) gens_at[nc.generators[g].bus].push_back(g);
  for (int u = 0; u < L.n_es; ++u) es_at[nc.storage_units[u].bus].push_back(u);

  const int S = L.S, T = L.T;

  // per-scenario per-period system error sums (load-positive)
  Mat sd(S, T), sq(S, T);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t) {
      sd(s, t) = scenarios[s].dp.col(t).sum();
      sq(s, t) = scenarios[s].dq.col(t).sum();
    }

  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < T; ++t) {
      // (7a)/(7b): surrogate injection <= generation - realized load + storage
      for (int i = 0; i < L.n; ++i) {
        for (auto kind : {TargetKind::BusP, TargetKind::BusQ}) {
          const auto& model = reg.at(kind, i);
          const bool active = kind == TargetKind::BusP;
          QuadConstraint qc;
          qc.tag = active ? "7a" : "7b";
          qc.q = model.a;
          qc.qvars.reserve(model.support.size());
          for (int coord : model.support) qc.qvars.push_back(L.volt(s, t, coord));
          for (std::size_t k = 0; k < model.support.size(); ++k)
            if (model.b[k] != 0.0)
              qc.lin.emplace_back(L.volt(s, t, model.support[k]), model.b[k]);
          double shift = 0.0;  // recourse-shifted injections minus realized load
          for (int g : gens_at[i]) {
            qc.lin.emplace_back(active ? L.gen_p(g, t) : L.gen_q(g, t), -1.0);
            shift += (active ? scheme.gen_p[g] : scheme.gen_q[g]) * (active ? sd : sq)(s, t);
          }
          for (int u : es_at[i]) {
            qc.lin.emplace_back(active ? L.es_p(u, t) : L.es_q(u, t), -1.0);
            shift += (active ? scheme.es_p[u] : scheme.es_q[u]) * (active ? sd : sq)(s, t);
          }
          double load = active ? nc.buses[i].p_load[t] + scenarios[s].dp(i, t)
                               : nc.buses[i].q_load[t] + scenarios[s].dq(i, t);
          qc.constant = model.c + load - shift;
          prog.quads.push_back(std::move(qc));
        }
      }

      // (7c)/(7d): surrogate line flow <= flow variable
      for (int l = 0; l < L.n_lines; ++l) {
        const auto& br = nc.branches[l];
        const int coords[4] = {2 * br.from, 2 * br.from + 1, 2 * br.to, 2 * br.to + 1};
        for (auto kind : {TargetKind::LineP, TargetKind::LineQ}) {
          const auto& model = reg.at(kind, l);
          QuadConstraint qc;
          qc.tag = kind == TargetKind::LineP ? "7c" : "7d";
          qc.q = model.a;
          for (int local : model.support) qc.qvars.push_back(L.volt(s, t, coords[local]));
          for (std::size_t k = 0; k < model.support.size(); ++k)
            if (model.b[k] != 0.0)
              qc.lin.emplace_back(L.volt(s, t, coords[model.support[k]]), model.b[k]);
          qc.lin.emplace_back(kind == TargetKind::LineP ? L.flow_p(s, l, t)
                                                        : L.flow_q(s, l, t),
                              -1.0);
          qc.constant = model.c;
          prog.quads.push_back(std::move(qc));
        }
      }

      // (7e): upper voltage bound as ||(e,f)|| <= v_max
      for (int i = 0; i < L.n; ++i) {
        SocConstraint sc;
        sc.tag = "7e";
        sc.arg_rows = {{{L.volt(s, t, 2 * i), 1.0}}, {{L.volt(s, t, 2 * i + 1), 1.0}}};
        sc.arg_consts = {0.0, 0.0};
        sc.bound_const = nc.buses[i].v_max;
        prog.socs.push_back(std::move(sc));
      }

      // (1m): branch capacity on the surrogate flow variables
      for (int l = 0; l < L.n_lines; ++l) {
        SocConstraint sc;
        sc.tag = "1m";
        sc.arg_rows = {{{L.flow_p(s, l, t), 1.0}}, {{L.flow_q(s, l, t), 1.0}}};
        sc.arg_consts = {0.0, 0.0};
        sc.bound_const = nc.branches[l].s_max;
        prog.socs.push_back(std::move(sc));
      }

      // (6a)-(6c): storage hull on the recourse-adjusted schedule
      for (int u = 0; u < L.n_es; ++u) {
        const auto& unit = nc.storage_units[u];
        auto hull = build_hull_constraints(unit, opts.hull_variant);
        double pshift = scheme.es_p[u] * sd(s, t);
        double qshift = scheme.es_q[u] * sq(s, t);
        // z = [P + pshift, Q + qshift, loss, 1]
        auto z_row = [&](int k) -> std::pair<std::vector<std::pair<int, double>>, double> {
          switch (k) {
            case 0: return {{{L.es_p(u, t), 1.0}}, pshift};
            case 1: return {{{L.es_q(u, t), 1.0}}, qshift};
            case 2: return {{{L.es_loss(u, t), 1.0}}, 0.0};
            default: return {{}, 1.0};
          }
        };
        auto soc_from_diag = [&](const Vec& diag, double rhs_extra, const char* tag) {
          SocConstraint sc;
          sc.tag = tag;
          for (int k = 0; k < 4; ++k) {
            if (diag[k] == 0.0) continue;
            auto [row, cst] = z_row(k);
            for (auto& [idx, v] : row) v *= diag[k];
            sc.arg_rows.push_back(row);
            sc.arg_consts.push_back(cst * diag[k]);
          }
          // b^T z = loss + 1
          sc.bound = {{L.es_loss(u, t), 1.0}};
          sc.bound_const = 1.0 + rhs_extra;
          prog.socs.push_back(std::move(sc));
        };
        soc_from_diag(hull.j_diag, 0.0, "6a");
        soc_from_diag(hull.ji_diag, hull.m, "6b");
        // k^T z <= 2m with k = [0, 0, 1, m]
        prog.linear.push_back({{{L.es_loss(u, t), 1.0}}, hull.m, false, "6c"});
      }
    }

  }

  // (1k)/(1l): generator limits on the recourse-adjusted output. Every
  // scenario produces the same coefficient row on the shared base variable
  // with a different right-hand side, so only the tightest side is emitted.
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < L.n_gen; ++g) {
      const auto& gen = nc.generators[g];
      double pshift_max = -1e300, pshift_min = 1e300;
      double qshift_max = -1e300, qshift_min = 1e300;
      for (int s = 0; s < S; ++s) {
        double sp = scheme.gen_p[g] * sd(s, t);
        double sq_ = scheme.gen_q[g] * sq(s, t);
        pshift_max = std::max(pshift_max, sp);
        pshift_min = std::min(pshift_min, sp);
        qshift_max = std::max(qshift_max, sq_);
        qshift_min = std::min(qshift_min, sq_);
      }
      prog.linear.push_back({{{L.gen_p(g, t), 1.0}}, gen.p_max - pshift_max, false, "1k"});
      prog.linear.push_back({{{L.gen_p(g, t), -1.0}}, pshift_min - gen.p_min, false, "1k"});
      prog.linear.push_back({{{L.gen_q(g, t), 1.0}}, gen.q_max - qshift_max, false, "1l"});
      prog.linear.push_back({{{L.gen_q(g, t), -1.0}}, qshift_min - gen.q_min, false, "1l"});
    }
  }

  // (1i): energy window on the recourse-adjusted net storage power. Stored
  // energy falls at the grid injection plus the loss:
  //   E_t = E0 - dt * sum_{k<=t} (P_es_k + w*sd_k + loss_k)
  // Parallel rows across scenarios collapse to the tightest right-hand side.
  for (int u = 0; u < L.n_es; ++u) {
    const auto& unit = nc.storage_units[u];
    Vec cumshift_min = Vec::Zero(T), cumshift_max = Vec::Zero(T);
    if (opts.energy_bounds_per_scenario) {
      for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int t = 0; t < T; ++t) {
          acc += scheme.es_p[u] * sd(s, t);
          cumshift_min[t] = s == 0 ? acc : std::min(cumshift_min[t], acc);
          cumshift_max[t] = s == 0 ? acc : std::max(cumshift_max[t], acc);
        }
      }
    }
    for (int t = 0; t < T; ++t) {
      LinearRow upper, lower;
      upper.tag = lower.tag = "1i";
      for (int k = 0; k <= t; ++k) {
        upper.coeffs.emplace_back(L.es_p(u, k), -nc.period_hours);
        upper.coeffs.emplace_back(L.es_loss(u, k), -nc.period_hours);
        lower.coeffs.emplace_back(L.es_p(u, k), nc.period_hours);
        lower.coeffs.emplace_back(L.es_loss(u, k), nc.period_hours);
      }
      // E0 - dt*(sum + shift_s) in [e_min, e_max] for every scenario s
      upper.rhs = unit.e_max - unit.e0 + nc.period_hours * cumshift_min[t];
      lower.rhs = unit.e0 - unit.e_min - nc.period_hours * cumshift_max[t];
      prog.linear.push_back(std::move(upper));
      prog.linear.push_back(std::move(lower));
    }
  }

  // (7g): the scenario-cost sum under the epigraph scalar, emitted in the
  // equivalent per-scenario average form and normalized by the cost scale so
  // the row coefficients stay comparable with the pu-valued rows.
  {
    double scale = 1.0;
    for (const auto& gen : nc.generators)
      scale = std::max({scale, std::abs(gen.c1), gen.c2, std::abs(gen.c0)});
    prog.cost_scale = scale;

    QuadConstraint qc;
    qc.tag = "7g";
    std::vector<double> lin_coef(L.n_gen * T, 0.0);
    double constant = 0.0;
    for (int g = 0; g < L.n_gen; ++g) {
      const auto& gen = nc.generators[g];
      for (int t = 0; t < T; ++t) {
        double lc = gen.c1;
        for (int si = 0; si < S; ++si) {
          double shift = scheme.gen_p[g] * sd(si, t);
          lc += 2.0 * gen.c2 * shift / double(S);
          constant += (gen.c2 * shift * shift + gen.c1 * shift + gen.c0) / double(S);
        }
        lin_coef[g * T + t] = lc;
      }
    }
    qc.q = Mat::Zero(L.n_gen * T, L.n_gen * T);
    for (int g = 0; g < L.n_gen; ++g)
      for (int t = 0; t < T; ++t) {
        qc.qvars.push_back(L.gen_p(g, t));
        qc.q(g * T + t, g * T + t) = nc.generators[g].c2 / scale;
        if (lin_coef[g * T + t] != 0.0)
          qc.lin.emplace_back(L.gen_p(g, t), lin_coef[g * T + t] / scale);
      }
    qc.lin.emplace_back(L.z(), -1.0);
    qc.constant = constant / scale;
    prog.quads.push_back(std::move(qc));
  }

  return prog;
}

// Lower the conic program to solver standard form: quadratic inequalities
// become rotated cones through a PSD factorization; linear and SOC blocks
// pass through. Variables are preserved, so the mapping is invertible on
// solutions.
inline StandardForm to_standard_form(const ConicProgram& prog) {
  StandardForm sf;
  sf.num_vars = int(prog.objective.size());
  sf.c = Eigen::Map<const Vec>(prog.objective.data(), prog.objective.size());

  std::vector<Triplet> trips;
  std::vector<double> rhs;
  auto add_row = [&](const std::vector<std::pair<int, double>>& coeffs, double b) {
    int r = int(rhs.size());
    for (const auto& [idx, v] : coeffs)
      if (v != 0.0) trips.emplace_back(r, idx, v);
    rhs.push_back(b);
    return r;
  };

  // linear rows, grouped into per-tag blocks by cone type
  std::map<std::pair<bool, std::string>, std::vector<const LinearRow*>> lin_groups;
  for (const auto& row : prog.linear) lin_groups[{row.equality, row.tag}].push_back(&row);
  for (const auto& [key, rows] : lin_groups) {
    ConeBlock blk;
    blk.type = key.first ? ConeType::Zero : ConeType::NonNeg;
    blk.tag = key.second;
    blk.start = int(rhs.size());
    for (const auto* row : rows) add_row(row->coeffs, row->rhs);
    blk.size = int(rhs.size()) - blk.start;
    sf.blocks.push_back(blk);
  }

  for (const auto& qc : prog.quads) {
    const int d = int(qc.qvars.size());
    Eigen::SelfAdjointEigenSolver<Mat> eig(qc.q);
    if (eig.info() != Eigen::Success) throw SolverError("quadratic block factorization failed");
    double max_eig = d > 0 ? std::max(eig.eigenvalues().maxCoeff(), 0.0) : 0.0;
    if (d > 0 && eig.eigenvalues().minCoeff() < -1e-7 * std::max(1.0, max_eig))
      throw SolverError("quadratic block is not PSD within tolerance (tag " + qc.tag + ")");

    std::vector<Vec> lrows;  // rows of L^T, i.e. sqrt(lambda) v^T
    for (int k = 0; k < d; ++k) {
      double lam = eig.eigenvalues()[k];
      if (lam > 1e-12 * std::max(1.0, max_eig))
        lrows.push_back(std::sqrt(lam) * eig.eigenvectors().col(k));
    }

    if (lrows.empty()) {
      // degenerate quadratic: pure linear row lin^T x + const <= 0
      ConeBlock blk{ConeType::NonNeg, int(rhs.size()), 1, qc.tag};
      std::vector<std::pair<int, double>> neg;
      for (const auto& [idx, v] : qc.lin) neg.emplace_back(idx, v);
      add_row(neg, -qc.constant);
      sf.blocks.push_back(blk);
      continue;
    }

    // rotated cone (u, v, w): u = -(lin^T x + const), v = 1/2, w = L^T z
    ConeBlock blk{ConeType::RSoc, int(rhs.size()), 2 + int(lrows.size()), qc.tag};
    add_row(qc.lin, -qc.constant);  // s_u = -const - lin^T x
    add_row({}, 0.5);
    for (const auto& lr : lrows) {
      std::vector<std::pair<int, double>> row;
      for (int k = 0; k < d; ++k)
        if (lr[k] != 0.0) row.emplace_back(qc.qvars[k], -lr[k]);
      add_row(row, 0.0);
    }
    sf.blocks.push_back(blk);
  }

  for (const auto& sc : prog.socs) {
    ConeBlock blk{ConeType::Soc, int(rhs.size()), 1 + int(sc.arg_rows.size()), sc.tag};
    std::vector<std::pair<int, double>> head;
    for (const auto& [idx, v] : sc.bound) head.emplace_back(idx, -v);
    add_row(head, sc.bound_const);
    for (std::size_t k = 0; k < sc.arg_rows.size(); ++k) {
      std::vector<std::pair<int, double>> row;
      for (const auto& [idx, v] : sc.arg_rows[k]) row.emplace_back(idx, -v);
      add_row(row, sc.arg_consts[k]);
    }
    sf.blocks.push_back(blk);
  }

  sf.a.resize(int(rhs.size()), sf.num_vars);
  sf.a.setFromTriplets(trips.begin(), trips.end());
  sf.b = Eigen::Map<Vec>(rhs.data(), rhs.size());
  return sf;
}

// Base dispatch schedule extracted from a solved program.
struct ProgramSolution {
  Mat gen_p, gen_q;    // n_gen x T
  Mat es_p, es_q;      // n_es x T, grid-side injections
  Mat es_loss;         // n_es x T
  double z = 0.0;
  double objective = 0.0;
};

inline ProgramSolution extract_solution(const ConicProgram& prog, const Vec& x) {
  const auto& layout = prog.layout;
  ProgramSolution ps;
  ps.gen_p.resize(layout.n_gen, layout.T);
  ps.gen_q.resize(layout.n_gen, layout.T);
  ps.es_p.resize(layout.n_es, layout.T);
  ps.es_q.resize(layout.n_es, layout.T);
  ps.es_loss.resize(layout.n_es, layout.T);
  for (int t = 0; t < layout.T; ++t) {
    for (int g = 0; g < layout.n_gen; ++g) {
      ps.gen_p(g, t) = x[layout.gen_p(g, t)];
      ps.gen_q(g, t) = x[layout.gen_q(g, t)];
    }
    for (int u = 0; u < layout.n_es; ++u) {
      ps.es_p(u, t) = x[layout.es_p(u, t)];
      ps.es_q(u, t) = x[layout.es_q(u, t)];
      ps.es_loss(u, t) = x[layout.es_loss(u, t)];
    }
  }
  ps.z = x[layout.z()] * prog.cost_scale;
  ps.objective = ps.z;
  return ps;
}

// Lower, solve and extract in one step; objectives are reported in $/h.
inline std::pair<ProgramSolution, SolveReport> solve_program(const ConicProgram& prog,
                                                             const SolveOptions& sopts = {},
                                                             Solution* raw = nullptr) {
  auto sf = to_standard_form(prog);
  auto [sol, rep] = solve(sf, sopts);
  rep.primal_objective *= prog.cost_scale;
  rep.dual_objective *= prog.cost_scale;
  rep.duality_gap *= prog.cost_scale;
  auto ps = extract_solution(prog, sol.x);
  ps.objective = rep.primal_objective;
  if (raw) *raw = sol;
  return {ps, rep};
}

// Single-scenario (forecast-only) solve; the objective is the Base Cost.
inline std::pair<ProgramSolution, SolveReport> deterministic_base_cost(
    const NetworkCase& nc, const ModelRegistry& reg, const RecourseScheme& scheme,
    const AssembleOptions& aopts = {}, const SolveOptions& sopts = {}) {
  ScenarioSample forecast;
  forecast.id = -1;
  forecast.dp = Mat::Zero(nc.n(), nc.period_count);
  forecast.dq = Mat::Zero(nc.n(), nc.period_count);
  auto prog = assemble(nc, reg, {forecast}, scheme, aopts);
  auto [ps, rep] = solve_program(prog, sopts);
  if (rep.status == SolveStatus::Infeasible)
    throw SolverError("deterministic base problem is infeasible");
  return {ps, rep};
}

// ---- JSON dump of the standard form (debugging / cross-solver interface) ----

inline nlohmann::json standard_form_to_json(const StandardForm& sf) {
  nlohmann::json j;
  j["num_vars"] = sf.num_vars;
  j["c"] = std::vector<double>(sf.c.data(), sf.c.data() + sf.c.size());
  j["b"] = std::vector<double>(sf.b.data(), sf.b.data() + sf.b.size());
  auto trips = nlohmann::json::array();
  for (int k = 0; k < sf.a.outerSize(); ++k)
    for (SpMat::InnerIterator it(sf.a, k); it; ++it)
      trips.push_back({int(it.row()), int(it.col()), it.value()});
  j["a"] = trips;
  auto blocks = nlohmann::json::array();
  static const char* cone_names[] = {"zero", "nonneg", "soc", "rsoc"};
  for (const auto& blk : sf.blocks)
    blocks.push_back({{"type", cone_names[int(blk.type)]},
                      {"start", blk.start},
                      {"size", blk.size},
                      {"tag", blk.tag}});
  j["blocks"] = blocks;
  return j;
}

inline StandardForm standard_form_from_json(const nlohmann::json& j) {
  StandardForm sf;
  sf.num_vars = j.at("num_vars").get<int>();
  auto cv = j.at("c").get<std::vector<double>>();
  sf.c = Eigen::Map<Vec>(cv.data(), cv.size());
  auto bv = j.at("b").get<std::vector<double>>();
  sf.b = Eigen::Map<Vec>(bv.data(), bv.size());
  std::vector<Triplet> trips;
  for (const auto& t : j.at("a"))
    trips.emplace_back(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
  sf.a.resize(int(bv.size()), sf.num_vars);
  sf.a.setFromTriplets(trips.begin(), trips.end());
  static const std::map<std::string, ConeType> cone_names = {{"zero", ConeType::Zero},
                                                             {"nonneg", ConeType::NonNeg},
                                                             {"soc", ConeType::Soc},
                                                             {"rsoc", ConeType::RSoc}};
  for (const auto& bj : j.at("blocks")) {
    ConeBlock blk;
    blk.type = cone_names.at(bj.at("type").get<std::string>());
    blk.start = bj.at("start").get<int>();
    blk.size = bj.at("size").get<int>();
    blk.tag = bj.at("tag").get<std::string>();
    sf.blocks.push_back(blk);
  }
  return sf;
}

}  // namespace ccgrid
