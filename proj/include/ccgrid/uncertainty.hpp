#pragma once

#include <fstream>
#include <vector>

#include "ccgrid/network.hpp"

namespace ccgrid {

// One realization of net-load forecast errors over all buses and periods.
struct ScenarioSample {
  int id = 0;
  Mat dp;  // n x T forecast errors, pu (realized - forecast)
  Mat dq;
};

struct ChanceSpec {
  double epsilon = 0.05;  // violation probability level
  double beta = 1e-4;     // confidence complement

  void validate() const {
    if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must be in (0,1)");
    if (!(beta > 0 && beta < 1)) throw ValidationError("beta must be in (0,1)");
  }
};

// Participation factors for every generator and storage unit, in case order.
struct RecourseScheme {
  std::vector<double> gen_p, gen_q;
  std::vector<double> es_p, es_q;

  static RecourseScheme from_case(const NetworkCase& nc) {
    RecourseScheme s;
    for (const auto& g : nc.generators) {
      s.gen_p.push_back(g.omega_p);
      s.gen_q.push_back(g.omega_q);
    }
    for (const auto& u : nc.storage_units) {
      s.es_p.push_back(u.omega_p);
      s.es_q.push_back(u.omega_q);
    }
    return s;
  }
};

struct ParticipationReport {
  bool ok = false;
  double deficit_p = 0.0;  // 1 - sum of active-power factors
  double deficit_q = 0.0;
};

inline ParticipationReport validate_participation(const RecourseScheme& s,
                                                  double tol = 1e-12) {
  double sp = 0, sq = 0;
  for (double w : s.gen_p) sp += w;
  for (double w : s.es_p) sp += w;
  for (double w : s.gen_q) sq += w;
  for (double w : s.es_q) sq += w;
  ParticipationReport r;
  r.deficit_p = 1.0 - sp;
  r.deficit_q = 1.0 - sq;
  r.ok = std::abs(r.deficit_p) <= tol && std::abs(r.deficit_q) <= tol;
  return r;
}

// Realized loads drawn independently per bus and period, uniform in
// [lo, hi] x forecast; reactive errors use the same multiplier (constant
// power factor). Deterministic under seed, independent of pool iteration
// order (per-scenario derived seeds).
inline std::vector<ScenarioSample> generate_scenario_pool(const NetworkCase& nc, double lo,
                                                          double hi, int count,
                                                          std::uint64_t seed) {
  if (!(lo > 0 && lo <= hi)) throw ValidationError("envelope must satisfy 0 < lo <= hi");
  if (count < 1) throw ValidationError("pool size must be >= 1");
  const int n = nc.n();
  const int T = nc.period_count;
  const std::uint64_t base = domain_seed(seed, SeedDomain::ScenarioPool);
  std::vector<ScenarioSample> pool(count);
  for (int s = 0; s < count; ++s) {
    Rng rng(derive_seed(base, std::uint64_t(s)));
    pool[s].id = s;
    pool[s].dp.resize(n, T);
    pool[s].dq.resize(n, T);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < T; ++t) {
        double mult = rng.uniform(lo, hi);
        pool[s].dp(i, t) = (mult - 1.0) * nc.buses[i].p_load[t];
        pool[s].dq(i, t) = (mult - 1.0) * nc.buses[i].q_load[t];
      }
    }
  }
  return pool;
}

struct BaseDispatch {
  Vec gen_p, gen_q;  // per generator
  Vec es_p, es_q;    // per storage unit, grid-side injections
};

// Affine recourse: every unit moves against the system-wide error sum in
// proportion to its participation factor.
inline BaseDispatch apply_recourse(const BaseDispatch& base, const RecourseScheme& scheme,
                                   const ScenarioSample& sample, int t) {
  double dp_sum = sample.dp.col(t).sum();
  double dq_sum = sample.dq.col(t).sum();
  BaseDispatch out = base;
  for (int i = 0; i < base.gen_p.size(); ++i) {
    out.gen_p[i] -= scheme.gen_p[i] * dp_sum;
    out.gen_q[i] -= scheme.gen_q[i] * dq_sum;
  }
  for (int i = 0; i < base.es_p.size(); ++i) {
    out.es_p[i] -= scheme.es_p[i] * dp_sum;
    out.es_q[i] -= scheme.es_q[i] * dq_sum;
  }
  return out;
}

inline void save_pool_csv(const std::vector<ScenarioSample>& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "scenario,bus,period,dp,dq\n";
  for (const auto& s : pool)
    for (int i = 0; i < s.dp.rows(); ++i)
      for (int t = 0; t < s.dp.cols(); ++t)
        out << s.id << ',' << i + 1 << ',' << t + 1 << ',' << format_double(s.dp(i, t))
            << ',' << format_double(s.dq(i, t)) << "\n";
}

inline std::vector<ScenarioSample> load_pool_csv(const std::string& path, int n, int T) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pool '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::strip(line) != "scenario,bus,period,dp,dq")
    throw ParseError("pool header must be 'scenario,bus,period,dp,dq'");
  std::vector<ScenarioSample> pool;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip(line);
    if (line.empty()) continue;
    auto row = detail::parse_row(line, lineno);
    if (row.size() != 5) throw ParseError("pool line " + std::to_string(lineno));
    int s = int(row[0]), i = int(row[1]) - 1, t = int(row[2]) - 1;
    if (s < 0 || i < 0 || i >= n || t < 0 || t >= T)
      throw ParseError("pool line " + std::to_string(lineno) + ": index out of range");
    if (s >= int(pool.size())) {
      int old = int(pool.size());
      pool.resize(s + 1);
      for (int k = old; k <= s; ++k) {
        pool[k].id = k;
        pool[k].dp = Mat::Zero(n, T);
        pool[k].dq = Mat::Zero(n, T);
      }
    }
    pool[s].dp(i, t) = row[3];
    pool[s].dq(i, t) = row[4];
  }
  return pool;
}

}  // namespace ccgrid
