#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ccgrid/acpf.hpp"

namespace ccgrid {

inline double soft_threshold(double v, double tau) {
  if (tau < 0) throw ValidationError("threshold must be >= 0");
  double mag = std::abs(v) - tau;
  return mag > 0 ? (v > 0 ? mag : -mag) : 0.0;
}

// Frobenius projection onto the PSD cone: symmetrize, eigendecompose, clip.
inline Mat psd_project(const Mat& s) {
  if (!s.allFinite()) throw ValidationError("psd_project: non-finite input");
  Mat sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw ValidationError("psd_project: eigensolver failed");
  Vec w = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
}

enum class TargetKind { BusP, BusQ, LineP, LineQ };

struct TargetId {
  TargetKind kind = TargetKind::BusP;
  int index = 0;  // bus or branch index

  bool operator<(const TargetId& o) const {
    if (kind != o.kind) return kind < o.kind;
    return index < o.index;
  }
  std::string str() const {
    static const char* names[] = {"bus_p", "bus_q", "line_p", "line_q"};
    return std::string(names[int(kind)]) + "[" + std::to_string(index) + "]";
  }
};

struct TrainingConfig {
  double mu = 0.0;          // l1 weight on the quadratic coefficients
  bool backtracking = true; // halve the step until the composite objective descends
  int max_iter = 5000;
  double tol = 1e-8;        // relative objective change
  bool support_restrict = true;  // fix coefficients outside the electrical neighborhood at zero
  double holdout_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (mu < 0) throw ValidationError("mu must be >= 0");
    if (tol <= 0) throw ValidationError("tolerance must be > 0");
  }
};

// Learned PSD-quadratic map y ~ x^T A x + B x + c over a restricted support
// of the full coordinate space; coordinates outside `support` carry zero
// coefficients.
struct ConvexQuadraticModel {
  TargetId target;
  int full_dim = 0;          // 2n for injections, 4 for line flows
  std::vector<int> support;  // coordinates with free coefficients
  Mat a;                     // |support| x |support|, symmetric PSD
  Vec b;                     // |support|
  double c = 0.0;

  struct Meta {
    double mu = 0.0;
    int samples = 0;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    int iterations = 0;
  } meta;

  // x_full indexed by the support (2n-space for bus targets, branch-local
  // 4-space for line targets)
  double eval(const Vec& x_full) const {
    Vec z(support.size());
    for (std::size_t k = 0; k < support.size(); ++k) z[k] = x_full[support[k]];
    return eval_local(z);
  }

  // z already restricted to the support coordinates, in support order
  double eval_local(const Vec& z) const { return z.dot(a * z) + b.dot(z) + c; }

  double min_eigenvalue() const {
    if (a.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> eig(a);
    return eig.eigenvalues().minCoeff();
  }

  int nonzero_count() const {
    int nz = 0;
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        if (std::abs(a(i, j)) > 1e-10) ++nz;
    return nz;
  }

  double density() const {
    return full_dim > 0 ? double(nonzero_count()) / (double(full_dim) * full_dim) : 0.0;
  }
};

struct FitTrace {
  std::vector<double> objective;
};

namespace detail {

struct ScaledFit {
  Mat a;
  Vec b;
  double c = 0.0;
  double loss = 0.0;
  int iterations = 0;
};

struct SmoothGradient {
  double loss = 0.0;
  Mat a;
  Vec b;
  double c = 0.0;
};

// value and gradient of the mean squared error (1/M) sum (pred - y)^2
inline SmoothGradient smooth_loss_gradient(const Mat& z, const Vec& y, const Mat& a,
                                           const Vec& b, double c) {
  const int m = int(z.rows());
  Vec pred = ((z * a).cwiseProduct(z)).rowwise().sum() + z * b + Vec::Constant(m, c);
  Vec r = pred - y;
  SmoothGradient g;
  g.loss = r.squaredNorm() / double(m);
  g.a = (2.0 / m) * (z.transpose() * r.asDiagonal() * z);
  g.a = 0.5 * (g.a + g.a.transpose());
  g.b = (2.0 / m) * (z.transpose() * r);
  g.c = (2.0 / m) * r.sum();
  return g;
}

inline double composite_objective(const Mat& z, const Vec& y, const Mat& a, const Vec& b,
                                  double c, double mu, double* smooth_out = nullptr) {
  Vec pred = ((z * a).cwiseProduct(z)).rowwise().sum() + z * b + Vec::Constant(z.rows(), c);
  double smooth = (pred - y).squaredNorm() / double(z.rows());
  if (smooth_out) *smooth_out = smooth;
  double l1 = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i; j < a.cols(); ++j) l1 += std::abs(a(i, j));
  return smooth + mu * l1;
}

// Projected proximal gradient on the standardized least-squares problem:
// gradient step on the smooth loss, soft-threshold on the quadratic
// coefficients, projection of A onto the PSD cone.
inline ScaledFit prox_gradient_fit(const Mat& z, const Vec& y, const TrainingConfig& cfg,
                                   FitTrace* trace) {
  const int m = int(z.rows());
  const int d = int(z.cols());
  ScaledFit fit;
  fit.a = Mat::Zero(d, d);
  fit.b = Vec::Zero(d);
  fit.c = m > 0 ? y.mean() : 0.0;

  // Lipschitz estimate for the smooth part via power iteration on the
  // feature Gram operator.
  double lip = 1.0;
  {
    Mat a_dir = Mat::Random(d, d);
    a_dir = 0.5 * (a_dir + a_dir.transpose());
    Vec b_dir = Vec::Random(d);
    double c_dir = 1.0;
    for (int it = 0; it < 30; ++it) {
      double norm = std::sqrt(a_dir.squaredNorm() + b_dir.squaredNorm() + c_dir * c_dir);
      a_dir /= norm;
      b_dir /= norm;
      c_dir /= norm;
      // the gradient map of the quadratic-in-parameters loss is linear, so
      // iterating it on zero labels yields the largest curvature
      auto g = smooth_loss_gradient(z, Vec::Zero(m), a_dir, b_dir, c_dir);
      lip = std::sqrt(g.a.squaredNorm() + g.b.squaredNorm() + g.c * g.c);
      a_dir = g.a;
      b_dir = g.b;
      c_dir = g.c;
    }
    lip = std::max(lip, 1e-12);
  }

  double step = 1.0 / lip;
  double obj = composite_objective(z, y, fit.a, fit.b, fit.c, cfg.mu);
  const double initial_obj = obj;
  if (trace) trace->objective.push_back(obj);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    auto grad = smooth_loss_gradient(z, y, fit.a, fit.b, fit.c);
    const Mat& ga = grad.a;
    const Vec& gb = grad.b;
    const double gc = grad.c;

    double trial = step;
    Mat a_new;
    Vec b_new;
    double c_new = 0.0, obj_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      a_new = fit.a - trial * ga;
      // prox of mu * sum_{k<=l} |A_kl| over symmetric matrices
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          a_new(i, j) = soft_threshold(a_new(i, j), i == j ? cfg.mu * trial
                                                           : 0.5 * cfg.mu * trial);
      a_new = psd_project(a_new);
      b_new = fit.b - trial * gb;
      c_new = fit.c - trial * gc;
      obj_new = composite_objective(z, y, a_new, b_new, c_new, cfg.mu);
      if (!cfg.backtracking || obj_new <= obj * (1.0 + 1e-14) + 1e-300) {
        accepted = true;
        break;
      }
      trial *= 0.5;
    }
    if (!accepted) break;  // stalled at a stationary point
    if (obj_new > 10.0 * initial_obj + 1e-9)
      throw SolverError("quadratic fit diverged at iteration " + std::to_string(iter) +
                        " (objective " + std::to_string(obj_new) + " from " +
                        std::to_string(initial_obj) + ")");
    double rel_change = std::abs(obj - obj_new) / std::max(1e-300, std::abs(obj));
    fit.a = a_new;
    fit.b = b_new;
    fit.c = c_new;
    obj = obj_new;
    fit.iterations = iter + 1;
    if (trace) trace->objective.push_back(obj);
    if (rel_change < cfg.tol) break;
  }
  composite_objective(z, y, fit.a, fit.b, fit.c, cfg.mu, &fit.loss);
  return fit;
}

}  // namespace detail

// Fit the convex quadratic surrogate on raw coordinates `x` (M x dim) against
// labels `y`. Internally the coordinates are standardized; the returned model
// is expressed in raw coordinates (the PSD property survives the diagonal
// congruence).
inline ConvexQuadraticModel fit_convex_quadratic(const Mat& x, const Vec& y,
                                                 const TargetId& target, int full_dim,
                                                 const std::vector<int>& support,
                                                 const TrainingConfig& cfg,
                                                 FitTrace* trace = nullptr) {
  cfg.validate();
  if (x.rows() == 0) throw ValidationError("empty training set");
  if (x.rows() != y.size()) throw ValidationError("feature/label count mismatch");
  const int d = int(x.cols());

  Vec mean = x.colwise().mean();
  Vec stdev(d);
  for (int k = 0; k < d; ++k) {
    double v = (x.col(k).array() - mean[k]).square().sum() / double(x.rows());
    stdev[k] = std::sqrt(std::max(v, 0.0));
    if (stdev[k] < 1e-12)
      throw ValidationError("constant feature column in fit (exclude it from the support)");
  }
  Mat z = (x.rowwise() - mean.transpose()).array().rowwise() / stdev.transpose().array();

  auto scaled = detail::prox_gradient_fit(z, y, cfg, trace);

  // map back: z = D (x - mean), D = diag(1/std)
  Vec dinv = stdev.cwiseInverse();
  Mat a_raw = dinv.asDiagonal() * scaled.a * dinv.asDiagonal();
  Vec b_raw = dinv.asDiagonal() * scaled.b - 2.0 * (a_raw * mean);
  double c_raw = scaled.c - (dinv.asDiagonal() * scaled.b).dot(mean) + mean.dot(a_raw * mean);

  ConvexQuadraticModel model;
  model.target = target;
  model.full_dim = full_dim;
  model.support = support;
  model.a = 0.5 * (a_raw + a_raw.transpose());
  // entries below the pattern threshold are stored as exact zeros
  for (int i = 0; i < model.a.rows(); ++i)
    for (int j = 0; j < model.a.cols(); ++j)
      if (std::abs(model.a(i, j)) < 1e-10) model.a(i, j) = 0.0;
  model.b = b_raw;
  model.c = c_raw;
  model.meta.mu = cfg.mu;
  model.meta.samples = int(x.rows());
  model.meta.seed = cfg.seed;
  model.meta.final_loss = scaled.loss;
  model.meta.iterations = scaled.iterations;
  return model;
}

struct ModelMetrics {
  double rmse = 0.0;
  double max_abs_error = 0.0;
  int nonzeros = 0;
  double density = 0.0;
};

// x_cols holds the support-restricted coordinates, one row per sample.
inline ModelMetrics evaluate_model(const ConvexQuadraticModel& model, const Mat& x_cols,
                                   const Vec& y) {
  if (x_cols.rows() != y.size()) throw ValidationError("feature/label count mismatch");
  if (x_cols.cols() != int(model.support.size()))
    throw ValidationError("feature dimension does not match the model support");
  ModelMetrics mm;
  double se = 0.0;
  for (int m = 0; m < x_cols.rows(); ++m) {
    double err = model.eval_local(x_cols.row(m).transpose()) - y[m];
    se += err * err;
    mm.max_abs_error = std::max(mm.max_abs_error, std::abs(err));
  }
  mm.rmse = x_cols.rows() > 0 ? std::sqrt(se / double(x_cols.rows())) : 0.0;
  mm.nonzeros = model.nonzero_count();
  mm.density = model.density();
  return mm;
}

// ---- per-target training over a labeled voltage dataset ----

// Electrical-neighborhood support for a bus target: e/f coordinates of the
// bus and its admittance neighbors, minus coordinates that are constant in
// the data (the pinned slack).
inline std::vector<int> bus_support(const AdmittanceMatrix& y, int bus, int slack,
                                    bool restrict_support) {
  const int n = int(y.G.rows());
  std::vector<bool> in(n, !restrict_support);
  if (restrict_support) {
    in[bus] = true;
    for (SpMat::InnerIterator it(y.G, bus); it; ++it) in[it.row()] = true;
    for (SpMat::InnerIterator it(y.B, bus); it; ++it) in[it.row()] = true;
  }
  std::vector<int> coords;
  for (int j = 0; j < n; ++j) {
    if (!in[j] || j == slack) continue;
    coords.push_back(2 * j);
    coords.push_back(2 * j + 1);
  }
  return coords;
}

inline std::vector<int> line_support(const Branch& br, int slack) {
  std::vector<int> coords;
  for (int bus : {br.from, br.to}) {
    if (bus == slack) continue;
    coords.push_back(2 * bus);
    coords.push_back(2 * bus + 1);
  }
  std::sort(coords.begin(), coords.end());
  return coords;
}

struct ModelRegistry {
  int n = 0;
  int n_lines = 0;
  std::map<TargetId, ConvexQuadraticModel> models;

  const ConvexQuadraticModel& at(TargetKind kind, int index) const {
    auto it = models.find(TargetId{kind, index});
    if (it == models.end())
      throw ValidationError("missing surrogate model " + TargetId{kind, index}.str());
    return it->second;
  }
};

namespace detail {

inline Mat select_columns(const Mat& x, const std::vector<int>& cols) {
  Mat out(x.rows(), cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = x.col(cols[k]);
  return out;
}

// Deterministic shuffled split for holdout evaluation.
inline std::pair<std::vector<int>, std::vector<int>> split_indices(int m, double holdout,
                                                                   std::uint64_t seed) {
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c69ULL));
  for (int i = m - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.next_below(std::uint64_t(i) + 1)]);
  int cut = m - int(std::floor(holdout * m));
  cut = std::max(1, std::min(cut, m));
  return {std::vector<int>(idx.begin(), idx.begin() + cut),
          std::vector<int>(idx.begin() + cut, idx.end())};
}

inline Mat take_rows(const Mat& x, const std::vector<int>& rows) {
  Mat out(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = x.row(rows[k]);
  return out;
}

inline Vec take(const Vec& v, const std::vector<int>& rows) {
  Vec out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = v[rows[k]];
  return out;
}

}  // namespace detail

struct TrainedTarget {
  ConvexQuadraticModel model;
  ModelMetrics holdout;
};

// Fit one target with a holdout evaluation. When `mu_grid` is non-empty the
// regularization weight is chosen by validation RMSE and the model is refit
// on the full data at the winner.
inline TrainedTarget train_target(const Mat& x_cols, const Vec& y, const TargetId& target,
                                  int full_dim, const std::vector<int>& support,
                                  TrainingConfig cfg, const std::vector<double>& mu_grid = {}) {
  auto [tr, va] = detail::split_indices(int(x_cols.rows()), cfg.holdout_fraction, cfg.seed);
  Mat xtr = detail::take_rows(x_cols, tr);
  Vec ytr = detail::take(y, tr);
  Mat xva = detail::take_rows(x_cols, va);
  Vec yva = detail::take(y, va);

  if (!mu_grid.empty()) {
    double best_rmse = std::numeric_limits<double>::max();
    double best_mu = mu_grid.front();
    for (double mu : mu_grid) {
      TrainingConfig c = cfg;
      c.mu = mu;
      auto m = fit_convex_quadratic(xtr, ytr, target, full_dim, support, c);
      double rmse = evaluate_model(m, xva, yva).rmse;
      if (rmse < best_rmse - 1e-15) {
        best_rmse = rmse;
        best_mu = mu;
      }
    }
    cfg.mu = best_mu;
  }

  TrainedTarget out;
  ConvexQuadraticModel holdout_model =
      fit_convex_quadratic(xtr, ytr, target, full_dim, support, cfg);
  out.holdout = evaluate_model(holdout_model, xva, yva);
  out.model = fit_convex_quadratic(x_cols, y, target, full_dim, support, cfg);
  return out;
}

// Train surrogates for every bus injection and line flow in the dataset.
inline ModelRegistry train_all_targets(const TrainingSet& ds, const NetworkCase& nc,
                                       const AdmittanceMatrix& y, TrainingConfig cfg,
                                       const std::vector<double>& mu_grid = {},
                                       std::map<std::string, ModelMetrics>* holdout = nullptr) {
  ModelRegistry reg;
  reg.n = ds.n;
  reg.n_lines = int(nc.branches.size());
  const int full_dim = 2 * ds.n;
  for (int i = 0; i < ds.n; ++i) {
    auto support = bus_support(y, i, ds.slack, cfg.support_restrict);
    Mat cols = detail::select_columns(ds.x, support);
    for (auto kind : {TargetKind::BusP, TargetKind::BusQ}) {
      TargetId id{kind, i};
      Vec labels = kind == TargetKind::BusP ? ds.bus_p.col(i) : ds.bus_q.col(i);
      auto trained = train_target(cols, labels, id, full_dim, support, cfg, mu_grid);
      if (holdout) (*holdout)[id.str()] = trained.holdout;
      reg.models[id] = std::move(trained.model);
    }
  }
  for (int l = 0; l < reg.n_lines; ++l) {
    // line models live on the 4-coordinate space [e_i f_i e_j f_j]
    const auto& br = nc.branches[l];
    std::vector<int> full_coords = {2 * br.from, 2 * br.from + 1, 2 * br.to, 2 * br.to + 1};
    std::vector<int> support4;
    for (int k = 0; k < 4; ++k)
      if (full_coords[k] / 2 != ds.slack) support4.push_back(k);
    Mat cols(ds.x.rows(), support4.size());
    for (std::size_t k = 0; k < support4.size(); ++k)
      cols.col(k) = ds.x.col(full_coords[support4[k]]);
    for (auto kind : {TargetKind::LineP, TargetKind::LineQ}) {
      TargetId id{kind, l};
      Vec labels = kind == TargetKind::LineP ? ds.line_p.col(l) : ds.line_q.col(l);
      auto trained = train_target(cols, labels, id, 4, support4, cfg, mu_grid);
      if (holdout) (*holdout)[id.str()] = trained.holdout;
      reg.models[id] = std::move(trained.model);
    }
  }
  return reg;
}

// ---- registry persistence ----

inline nlohmann::json model_to_json(const ConvexQuadraticModel& m) {
  nlohmann::json j;
  static const char* names[] = {"bus_p", "bus_q", "line_p", "line_q"};
  j["kind"] = names[int(m.target.kind)];
  j["index"] = m.target.index;
  j["full_dim"] = m.full_dim;
  j["support"] = m.support;
  auto triples = nlohmann::json::array();
  for (int i = 0; i < m.a.rows(); ++i)
    for (int jj = i; jj < m.a.cols(); ++jj)
      if (std::abs(m.a(i, jj)) > 1e-10)
        triples.push_back({i, jj, m.a(i, jj)});
  j["a"] = triples;
  j["b"] = std::vector<double>(m.b.data(), m.b.data() + m.b.size());
  j["c"] = m.c;
  j["meta"] = {{"mu", m.meta.mu},
               {"samples", m.meta.samples},
               {"seed", m.meta.seed},
               {"final_loss", m.meta.final_loss},
               {"iterations", m.meta.iterations}};
  return j;
}

inline ConvexQuadraticModel model_from_json(const nlohmann::json& j) {
  ConvexQuadraticModel m;
  std::string kind = j.at("kind").get<std::string>();
  static const std::map<std::string, TargetKind> kinds = {{"bus_p", TargetKind::BusP},
                                                          {"bus_q", TargetKind::BusQ},
                                                          {"line_p", TargetKind::LineP},
                                                          {"line_q", TargetKind::LineQ}};
  m.target.kind = kinds.at(kind);
  m.target.index = j.at("index").get<int>();
  m.full_dim = j.at("full_dim").get<int>();
  m.support = j.at("support").get<std::vector<int>>();
  int d = int(m.support.size());
  m.a = Mat::Zero(d, d);
  for (const auto& t : j.at("a")) {
    int r = t.at(0).get<int>(), c = t.at(1).get<int>();
    m.a(r, c) = m.a(c, r) = t.at(2).get<double>();
  }
  auto bv = j.at("b").get<std::vector<double>>();
  m.b = Eigen::Map<Vec>(bv.data(), bv.size());
  m.c = j.at("c").get<double>();
  const auto& meta = j.at("meta");
  m.meta.mu = meta.at("mu").get<double>();
  m.meta.samples = meta.at("samples").get<int>();
  m.meta.seed = meta.at("seed").get<std::uint64_t>();
  m.meta.final_loss = meta.at("final_loss").get<double>();
  m.meta.iterations = meta.at("iterations").get<int>();
  return m;
}

inline void save_registry(const ModelRegistry& reg, const std::string& path) {
  nlohmann::json j;
  j["n"] = reg.n;
  j["n_lines"] = reg.n_lines;
  auto arr = nlohmann::json::array();
  for (const auto& [id, m] : reg.models) arr.push_back(model_to_json(m));
  j["models"] = arr;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump();
}

inline ModelRegistry load_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open registry '" + path + "'");
  nlohmann::json j;
  in >> j;
  ModelRegistry reg;
  reg.n = j.at("n").get<int>();
  reg.n_lines = j.at("n_lines").get<int>();
  for (const auto& mj : j.at("models")) {
    auto m = model_from_json(mj);
    reg.models[m.target] = std::move(m);
  }
  return reg;
}

}  // namespace ccgrid
