#pragma once

#include <cmath>
#include <fstream>

#include "ccgrid/network.hpp"

namespace ccgrid {

// Rectangular voltage vector, layout [e_1, f_1, ..., e_n, f_n].
struct VoltageRect {
  Vec x;

  static VoltageRect flat(int n, double e0 = 1.0) {
    VoltageRect v;
    v.x = Vec::Zero(2 * n);
    for (int i = 0; i < n; ++i) v.x[2 * i] = e0;
    return v;
  }
  int n() const { return int(x.size()) / 2; }
  double e(int i) const { return x[2 * i]; }
  double f(int i) const { return x[2 * i + 1]; }
  double vm2(int i) const { return e(i) * e(i) + f(i) * f(i); }
};

// Direct evaluation of the rectangular power-flow sums for one bus.
// G and B are value-symmetric for two-port lines and shunts, so column i of
// the column-major sparse storage doubles as row i.
inline std::pair<double, double> exact_injection(const VoltageRect& v,
                                                 const AdmittanceMatrix& y, int i) {
  if (2 * y.G.rows() != v.x.size())
    throw ValidationError("voltage/admittance dimension mismatch");
  double re = 0.0, im = 0.0;  // sums of (G e - B f) and (G f + B e)
  for (SpMat::InnerIterator it(y.G, i); it; ++it) {
    int j = int(it.row());
    re += it.value() * v.e(j);
    im += it.value() * v.f(j);
  }
  for (SpMat::InnerIterator it(y.B, i); it; ++it) {
    int j = int(it.row());
    re -= it.value() * v.f(j);
    im += it.value() * v.e(j);
  }
  double p = v.e(i) * re + v.f(i) * im;
  double q = v.f(i) * re - v.e(i) * im;
  return {p, q};
}

// Symmetric indefinite quadratic forms for injections, built from the
// admittance matrix: P_i = X^T A_i X, Q_i = X^T B_i X.
struct InjectionForms {
  SpMat a;  // 2n x 2n
  SpMat b;
};

inline InjectionForms injection_forms(const AdmittanceMatrix& y, int i) {
  const int n = int(y.G.rows());
  // gather row i of G and B (value-symmetric, so read column i)
  std::vector<double> grow(n, 0.0), brow(n, 0.0);
  for (SpMat::InnerIterator it(y.G, i); it; ++it) grow[it.row()] = it.value();
  for (SpMat::InnerIterator it(y.B, i); it; ++it) brow[it.row()] = it.value();
  std::vector<Triplet> ta, tb;
  for (int j = 0; j < n; ++j) {
    double gij = grow[j];
    double bij = brow[j];
    if (gij == 0.0 && bij == 0.0) continue;
    int ei = 2 * i, fi = 2 * i + 1, ej = 2 * j, fj = 2 * j + 1;
    // P_i, symmetrized halves
    ta.emplace_back(ei, ej, 0.5 * gij);
    ta.emplace_back(ej, ei, 0.5 * gij);
    ta.emplace_back(ei, fj, -0.5 * bij);
    ta.emplace_back(fj, ei, -0.5 * bij);
    ta.emplace_back(fi, fj, 0.5 * gij);
    ta.emplace_back(fj, fi, 0.5 * gij);
    ta.emplace_back(fi, ej, 0.5 * bij);
    ta.emplace_back(ej, fi, 0.5 * bij);
    // Q_i
    tb.emplace_back(fi, ej, 0.5 * gij);
    tb.emplace_back(ej, fi, 0.5 * gij);
    tb.emplace_back(fi, fj, -0.5 * bij);
    tb.emplace_back(fj, fi, -0.5 * bij);
    tb.emplace_back(ei, fj, -0.5 * gij);
    tb.emplace_back(fj, ei, -0.5 * gij);
    tb.emplace_back(ei, ej, -0.5 * bij);
    tb.emplace_back(ej, ei, -0.5 * bij);
  }
  InjectionForms f;
  f.a.resize(2 * n, 2 * n);
  f.b.resize(2 * n, 2 * n);
  f.a.setFromTriplets(ta.begin(), ta.end());
  f.b.setFromTriplets(tb.begin(), tb.end());
  return f;
}

// From-end branch flow, series admittance only (line charging does not enter
// the branch-flow expressions).
inline std::pair<double, double> exact_line_flow(const Branch& br, double ei, double fi,
                                                 double ej, double fj) {
  if (br.r == 0.0 && br.x == 0.0) throw ValidationError("zero-impedance branch");
  std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
  double g = y.real(), b = y.imag();
  double u = ei * ei + fi * fi - ei * ej - fi * fj;
  double w = ei * fj - fi * ej;
  return {g * u + b * w, g * w - b * u};
}

inline std::pair<double, double> exact_line_flow(const Branch& br, const VoltageRect& v) {
  return exact_line_flow(br, v.e(br.from), v.f(br.from), v.e(br.to), v.f(br.to));
}

// 4x4 symmetric forms over X_ij = [e_i, f_i, e_j, f_j].
struct LineForms {
  Mat a;  // P_ij
  Mat b;  // Q_ij
};

inline LineForms line_forms(const Branch& br) {
  std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
  double g = y.real(), b = y.imag();
  LineForms f;
  f.a = Mat::Zero(4, 4);
  f.b = Mat::Zero(4, 4);
  f.a(0, 0) = g;
  f.a(1, 1) = g;
  f.a(0, 2) = f.a(2, 0) = -0.5 * g;
  f.a(1, 3) = f.a(3, 1) = -0.5 * g;
  f.a(0, 3) = f.a(3, 0) = 0.5 * b;
  f.a(1, 2) = f.a(2, 1) = -0.5 * b;
  f.b(0, 0) = -b;
  f.b(1, 1) = -b;
  f.b(0, 2) = f.b(2, 0) = 0.5 * b;
  f.b(1, 3) = f.b(3, 1) = 0.5 * b;
  f.b(0, 3) = f.b(3, 0) = 0.5 * g;
  f.b(1, 2) = f.b(2, 1) = -0.5 * g;
  return f;
}

struct PowerFlowResult {
  VoltageRect voltage;
  Vec bus_p, bus_q;
  Vec line_p, line_q;  // from-end flows per branch
  int iterations = 0;
  double max_mismatch = 0.0;
  bool converged = false;
};

// Newton-Raphson in rectangular coordinates. All non-slack buses carry fixed
// (P, Q) injections; the slack bus keeps e = e0, f = 0 and absorbs the
// residual. The Jacobian is assembled from the quadratic forms (gradient
// 2 A_i X is linear in X).
inline PowerFlowResult solve_power_flow(const NetworkCase& nc, const AdmittanceMatrix& y,
                                        const Vec& p_spec, const Vec& q_spec,
                                        const VoltageRect& start, double tol = 1e-10,
                                        int max_iter = 30) {
  const int n = nc.n();
  const int slack = nc.slack();
  if (slack < 0) throw ValidationError("no reference bus");
  if (tol <= 0) throw ValidationError("tolerance must be > 0");
  if (p_spec.size() != n || q_spec.size() != n)
    throw ValidationError("injection vector size mismatch");

  std::vector<InjectionForms> forms;
  forms.reserve(n);
  for (int i = 0; i < n; ++i) forms.push_back(injection_forms(y, i));

  // unknown ordering: [e_i, f_i] for each non-slack bus
  std::vector<int> unknown;
  for (int i = 0; i < n; ++i)
    if (i != slack) {
      unknown.push_back(2 * i);
      unknown.push_back(2 * i + 1);
    }
  const int m = int(unknown.size());

  PowerFlowResult res;
  res.voltage = start;
  Vec& x = res.voltage.x;
  x[2 * slack] = start.e(slack);
  x[2 * slack + 1] = 0.0;

  for (int iter = 0; iter <= max_iter; ++iter) {
    Vec mismatch(m);
    Mat jac(m, m);
    int row = 0;
    for (int i = 0; i < n; ++i) {
      if (i == slack) continue;
      auto [p, q] = exact_injection(res.voltage, y, i);
      mismatch[row] = p - p_spec[i];
      mismatch[row + 1] = q - q_spec[i];
      Vec gp = 2.0 * (forms[i].a * x);
      Vec gq = 2.0 * (forms[i].b * x);
      for (int c = 0; c < m; ++c) {
        jac(row, c) = gp[unknown[c]];
        jac(row + 1, c) = gq[unknown[c]];
      }
      row += 2;
    }
    res.max_mismatch = mismatch.size() ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    res.iterations = iter;
    if (res.max_mismatch <= tol) {
      res.converged = true;
      break;
    }
    if (iter == max_iter) break;
    Vec step = jac.partialPivLu().solve(mismatch);
    if (!step.allFinite()) break;
    for (int c = 0; c < m; ++c) x[unknown[c]] -= step[c];
  }

  res.bus_p.resize(n);
  res.bus_q.resize(n);
  for (int i = 0; i < n; ++i) {
    auto [p, q] = exact_injection(res.voltage, y, i);
    res.bus_p[i] = p;
    res.bus_q[i] = q;
  }
  const int nl = int(nc.branches.size());
  res.line_p.resize(nl);
  res.line_q.resize(nl);
  for (int l = 0; l < nl; ++l) {
    auto [p, q] = exact_line_flow(nc.branches[l], res.voltage);
    res.line_p[l] = p;
    res.line_q[l] = q;
  }
  return res;
}

// Labeled voltage samples for surrogate training. Voltages are drawn
// uniformly from the box e in [1-rho, 1+rho], f in [-rho, rho] (slack fixed)
// and labeled with the exact injections and from-end flows.
struct TrainingSet {
  int n = 0;
  int slack = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  Mat x;       // M x 2n
  Mat bus_p;   // M x n
  Mat bus_q;   // M x n
  Mat line_p;  // M x L
  Mat line_q;  // M x L
};

inline TrainingSet sample_training_set(const NetworkCase& nc, const AdmittanceMatrix& y,
                                       int count, double rho, std::uint64_t seed) {
  if (count < 1) throw ValidationError("sample count must be >= 1");
  if (rho < 0 || rho >= 1) throw ValidationError("sampling radius must be in [0, 1)");
  const int n = nc.n();
  const int nl = int(nc.branches.size());
  const int slack = nc.slack();

  TrainingSet ds;
  ds.n = n;
  ds.slack = slack;
  ds.rho = rho;
  ds.seed = seed;
  ds.x.resize(count, 2 * n);
  ds.bus_p.resize(count, n);
  ds.bus_q.resize(count, n);
  ds.line_p.resize(count, nl);
  ds.line_q.resize(count, nl);

  const std::uint64_t base = domain_seed(seed, SeedDomain::Training);
  for (int m = 0; m < count; ++m) {
    Rng rng(derive_seed(base, std::uint64_t(m)));
    VoltageRect v = VoltageRect::flat(n);
    for (int i = 0; i < n; ++i) {
      if (i == slack) continue;
      v.x[2 * i] = rng.uniform(1.0 - rho, 1.0 + rho);
      v.x[2 * i + 1] = rng.uniform(-rho, rho);
    }
    ds.x.row(m) = v.x.transpose();
    for (int i = 0; i < n; ++i) {
      auto [p, q] = exact_injection(v, y, i);
      ds.bus_p(m, i) = p;
      ds.bus_q(m, i) = q;
    }
    for (int l = 0; l < nl; ++l) {
      auto [p, q] = exact_line_flow(nc.branches[l], v);
      ds.line_p(m, l) = p;
      ds.line_q(m, l) = q;
    }
  }
  return ds;
}

namespace detail {
inline nlohmann::json mat_to_json(const Mat& m) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j, int cols_hint = -1) {
  int rows = int(j.size());
  int cols = rows > 0 ? int(j.at(0).size()) : std::max(cols_hint, 0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}
}  // namespace detail

inline void save_training_set(const TrainingSet& ds, const std::string& path) {
  nlohmann::json j;
  j["n"] = ds.n;
  j["slack"] = ds.slack;
  j["rho"] = ds.rho;
  j["seed"] = ds.seed;
  j["count"] = ds.x.rows();
  j["x"] = detail::mat_to_json(ds.x);
  j["bus_p"] = detail::mat_to_json(ds.bus_p);
  j["bus_q"] = detail::mat_to_json(ds.bus_q);
  j["line_p"] = detail::mat_to_json(ds.line_p);
  j["line_q"] = detail::mat_to_json(ds.line_q);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump();
}

inline TrainingSet load_training_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  nlohmann::json j;
  in >> j;
  TrainingSet ds;
  ds.n = j.at("n").get<int>();
  ds.slack = j.at("slack").get<int>();
  ds.rho = j.at("rho").get<double>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.x = detail::mat_from_json(j.at("x"));
  ds.bus_p = detail::mat_from_json(j.at("bus_p"));
  ds.bus_q = detail::mat_from_json(j.at("bus_q"));
  ds.line_p = detail::mat_from_json(j.at("line_p"), 0);
  ds.line_q = detail::mat_from_json(j.at("line_q"), 0);
  return ds;
}

}  // namespace ccgrid
