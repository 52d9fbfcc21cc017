#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccgrid/acpf.hpp"
#include "ccgrid/program.hpp"
#include "ccgrid/sampling.hpp"

namespace ccgrid {

// 95% Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054) {
  WilsonInterval w;
  if (trials <= 0) return w;
  double p = double(successes) / trials;
  w.rate = p;
  double z2n = z * z / trials;
  double denom = 1.0 + z2n;
  double center = (p + 0.5 * z2n) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials)) / denom;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

struct ValidationOptions {
  double pu_tol = 1e-5;   // constraint slack beyond which a scenario violates
  double nr_tol = 1e-8;
  int nr_max_iter = 40;
};

struct ScenarioCheck {
  bool converged = false;
  bool violated = false;
  std::vector<std::string> families;  // violated constraint families
  bool lower_voltage_violated = false;
  double worst_lower_voltage_margin = 0.0;  // max(vmin^2 - vm^2) over buses/periods
  double surrogate_sq_err = 0.0;            // accumulated squared surrogate error
  double surrogate_max_err = 0.0;
  int surrogate_points = 0;
};

// Re-dispatch one fresh scenario through the affine recourse, solve the exact
// power flow and evaluate the original operating constraints, including the
// lower voltage bound that the convex program drops.
inline ScenarioCheck check_scenario(const NetworkCase& nc, const AdmittanceMatrix& y,
                                    const ModelRegistry* reg, const ProgramSolution& sol,
                                    const RecourseScheme& scheme, const ScenarioSample& sample,
                                    const ValidationOptions& opts = {}) {
  const int n = nc.n();
  const int T = nc.period_count;
  ScenarioCheck chk;
  chk.converged = true;

  std::set<std::string> fams;
  std::vector<Vec> es_inflow(nc.storage_units.size(), Vec::Zero(T));

  for (int t = 0; t < T; ++t) {
    double sd = sample.dp.col(t).sum();
    double sq = sample.dq.col(t).sum();

    // recourse-adjusted dispatch: units move with the load imbalance
    Vec gen_p(nc.generators.size()), gen_q(nc.generators.size());
    for (std::size_t g = 0; g < nc.generators.size(); ++g) {
      gen_p[g] = sol.gen_p(g, t) + scheme.gen_p[g] * sd;
      gen_q[g] = sol.gen_q(g, t) + scheme.gen_q[g] * sq;
      const auto& gen = nc.generators[g];
      if (gen_p[g] > gen.p_max + opts.pu_tol || gen_p[g] < gen.p_min - opts.pu_tol)
        fams.insert("1k");
      if (gen_q[g] > gen.q_max + opts.pu_tol || gen_q[g] < gen.q_min - opts.pu_tol)
        fams.insert("1l");
    }
    Vec es_p(nc.storage_units.size()), es_q(nc.storage_units.size());
    for (std::size_t u = 0; u < nc.storage_units.size(); ++u) {
      es_p[u] = sol.es_p(u, t) + scheme.es_p[u] * sd;
      es_q[u] = sol.es_q(u, t) + scheme.es_q[u] * sq;
      const auto& unit = nc.storage_units[u];
      double norm = std::sqrt(es_p[u] * es_p[u] + es_q[u] * es_q[u]);
      if (norm > unit.s_max + opts.pu_tol) fams.insert("1h");
      double loss = exact_loss(es_p[u], es_q[u], unit);
      es_inflow[u][t] = -(es_p[u] + loss);
    }

    // injections seen by the network at realized loads
    Vec p_inj = Vec::Zero(n), q_inj = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      p_inj[i] -= nc.buses[i].p_load[t] + sample.dp(i, t);
      q_inj[i] -= nc.buses[i].q_load[t] + sample.dq(i, t);
    }
    for (std::size_t g = 0; g < nc.generators.size(); ++g) {
      p_inj[nc.generators[g].bus] += gen_p[g];
      q_inj[nc.generators[g].bus] += gen_q[g];
    }
    for (std::size_t u = 0; u < nc.storage_units.size(); ++u) {
      p_inj[nc.storage_units[u].bus] += es_p[u];
      q_inj[nc.storage_units[u].bus] += es_q[u];
    }

    auto pf = solve_power_flow(nc, y, p_inj, q_inj, VoltageRect::flat(n), opts.nr_tol,
                               opts.nr_max_iter);
    if (!pf.converged) {
      chk.converged = false;
      return chk;
    }

    for (int i = 0; i < n; ++i) {
      double vm2 = pf.voltage.vm2(i);
      double vmin2 = nc.buses[i].v_min * nc.buses[i].v_min;
      double vmax2 = nc.buses[i].v_max * nc.buses[i].v_max;
      if (vm2 > vmax2 + opts.pu_tol) fams.insert("1j");
      double lower_margin = vmin2 - vm2;
      chk.worst_lower_voltage_margin = std::max(chk.worst_lower_voltage_margin, lower_margin);
      if (lower_margin > opts.pu_tol) {
        fams.insert("1j");
        chk.lower_voltage_violated = true;
      }
    }
    for (std::size_t l = 0; l < nc.branches.size(); ++l) {
      double flow = std::sqrt(pf.line_p[l] * pf.line_p[l] + pf.line_q[l] * pf.line_q[l]);
      if (flow > nc.branches[l].s_max + opts.pu_tol) fams.insert("1m");
    }

    if (reg) {
      // surrogate-vs-exact statistics at the oracle's voltage
      for (int i = 0; i < n; ++i) {
        double pred = reg->at(TargetKind::BusP, i).eval(pf.voltage.x);
        double err = pred - pf.bus_p[i];
        chk.surrogate_sq_err += err * err;
        chk.surrogate_max_err = std::max(chk.surrogate_max_err, std::abs(err));
        pred = reg->at(TargetKind::BusQ, i).eval(pf.voltage.x);
        err = pred - pf.bus_q[i];
        chk.surrogate_sq_err += err * err;
        chk.surrogate_max_err = std::max(chk.surrogate_max_err, std::abs(err));
        chk.surrogate_points += 2;
      }
    }
  }

  for (std::size_t u = 0; u < nc.storage_units.size(); ++u) {
    auto viol = energy_trajectory_check(es_inflow[u], nc.storage_units[u], nc.period_hours);
    for (const auto& v : viol)
      if (v.margin > opts.pu_tol) {
        fams.insert("1i");
        break;
      }
  }

  chk.families.assign(fams.begin(), fams.end());
  chk.violated = !fams.empty();
  return chk;
}

struct ValidationReport {
  int pool_size = 0;
  int violations = 0;
  int oracle_failures = 0;
  WilsonInterval wilson;
  std::map<std::string, int> family_counts;
  int lower_voltage_scenarios = 0;
  double worst_lower_voltage_margin = 0.0;
  double surrogate_rmse = 0.0;
  double surrogate_max_err = 0.0;
};

// Empirical joint-violation estimate over a fresh scenario pool.
inline ValidationReport estimate_violation(const NetworkCase& nc, const AdmittanceMatrix& y,
                                           const ModelRegistry* reg,
                                           const ProgramSolution& sol,
                                           const RecourseScheme& scheme,
                                           const std::vector<ScenarioSample>& fresh_pool,
                                           const ValidationOptions& opts = {}) {
  ValidationReport rep;
  rep.pool_size = int(fresh_pool.size());
  double sq_sum = 0.0;
  long long sq_count = 0;
  for (const auto& sample : fresh_pool) {
    auto chk = check_scenario(nc, y, reg, sol, scheme, sample, opts);
    if (!chk.converged) {
      ++rep.oracle_failures;
      continue;
    }
    if (chk.violated) {
      ++rep.violations;
      for (const auto& f : chk.families) ++rep.family_counts[f];
    }
    if (chk.lower_voltage_violated) ++rep.lower_voltage_scenarios;
    rep.worst_lower_voltage_margin =
        std::max(rep.worst_lower_voltage_margin, chk.worst_lower_voltage_margin);
    sq_sum += chk.surrogate_sq_err;
    sq_count += chk.surrogate_points;
    rep.surrogate_max_err = std::max(rep.surrogate_max_err, chk.surrogate_max_err);
  }
  rep.wilson = wilson_interval(rep.violations, rep.pool_size);
  rep.surrogate_rmse = sq_count > 0 ? std::sqrt(sq_sum / double(sq_count)) : 0.0;
  return rep;
}

// ---- sequential verification ----

struct VerificationCurve {
  std::string strategy;
  std::vector<int> counts;
  std::vector<double> objective;
  std::vector<double> normalized;  // objective / base cost
  std::vector<std::string> status;
  int flatten_count = -1;  // first count after which all changes are small
};

inline int find_flatten_count(const std::vector<int>& counts,
                              const std::vector<double>& objective, double tol) {
  if (counts.empty()) return -1;
  int last_violation = -1;
  for (std::size_t j = 0; j + 1 < objective.size(); ++j) {
    double change = std::abs(objective[j + 1] - objective[j]);
    if (change > tol * std::max(std::abs(objective[j]), 1e-12)) last_violation = int(j);
  }
  return counts[last_violation + 1];
}

// Re-solve the scenario program at every prefix of the ordered selection and
// record the objective path.
inline VerificationCurve sequential_verification(
    const NetworkCase& nc, const ModelRegistry& reg, const RecourseScheme& scheme,
    const std::vector<ScenarioSample>& pool, const SelectionResult& selection,
    int up_to, double base_cost, double flatten_tol = 1e-4,
    const AssembleOptions& aopts = {}, const SolveOptions& sopts = {}) {
  VerificationCurve curve;
  curve.strategy = selection.strategy;
  up_to = std::min<int>(up_to, int(selection.ids.size()));
  std::vector<ScenarioSample> prefix;
  for (int r = 0; r < up_to; ++r) {
    prefix.push_back(pool.at(selection.ids[r]));
    auto prog = assemble(nc, reg, prefix, scheme, aopts);
    auto [ps, rep] = solve_program(prog, sopts);
    curve.counts.push_back(r + 1);
    curve.objective.push_back(rep.primal_objective);
    curve.normalized.push_back(base_cost != 0.0 ? rep.primal_objective / base_cost : 0.0);
    curve.status.push_back(rep.status_str());
  }
  curve.flatten_count = find_flatten_count(curve.counts, curve.objective, flatten_tol);
  return curve;
}

// ---- report emission ----

inline void write_curve_csv(const VerificationCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "count,objective,normalized,status\n";
  for (std::size_t i = 0; i < curve.counts.size(); ++i)
    out << curve.counts[i] << ',' << format_double(curve.objective[i]) << ','
        << format_double(curve.normalized[i]) << ',' << curve.status[i] << "\n";
}

struct SizeRow {
  std::string label;
  long long d_prime = 0;
  long long fast_n = 0;
  long long rs_n = 0;
};

inline void write_sizes_csv(const std::vector<SizeRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "case,d_prime,n_fast,n_rs,ratio1\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.d_prime << ',' << r.fast_n << ',' << r.rs_n << ','
        << format_double(double(r.d_prime) / double(r.rs_n)) << "\n";
}

struct CostRow {
  std::string label;
  double base_cost = 0.0;
  double objective_cost = 0.0;
};

inline void write_costs_csv(const std::vector<CostRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "case,base_cost,objective_cost,ratio2\n";
  for (const auto& r : rows)
    out << r.label << ',' << format_double(r.base_cost) << ','
        << format_double(r.objective_cost) << ',' << format_double(r.objective_cost / r.base_cost)
        << "\n";
}

struct SelectionRow {
  std::string strategy;
  int best = 0;   // smallest flattening count over trials
  int worst = 0;  // largest flattening count over trials
};

inline void write_selections_csv(const std::vector<SelectionRow>& rows,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "strategy,best,worst\n";
  for (const auto& r : rows) out << r.strategy << ',' << r.best << ',' << r.worst << "\n";
}

inline void write_validation_json(const ValidationReport& rep, const std::string& path) {
  nlohmann::json j;
  j["pool_size"] = rep.pool_size;
  j["violations"] = rep.violations;
  j["oracle_failures"] = rep.oracle_failures;
  j["rate"] = rep.wilson.rate;
  j["wilson_lo"] = rep.wilson.lo;
  j["wilson_hi"] = rep.wilson.hi;
  j["families"] = rep.family_counts;
  j["lower_voltage_scenarios"] = rep.lower_voltage_scenarios;
  j["worst_lower_voltage_margin"] = rep.worst_lower_voltage_margin;
  j["surrogate_rmse"] = rep.surrogate_rmse;
  j["surrogate_max_err"] = rep.surrogate_max_err;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

inline void write_manifest(const nlohmann::json& config, std::uint64_t seed,
                           const std::string& path) {
  nlohmann::json j;
  j["config_hash"] = fnv1a(config.dump());
  j["seed"] = seed;
  j["format_version"] = 1;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace ccgrid
