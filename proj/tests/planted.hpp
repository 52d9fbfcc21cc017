#pragma once

// Feasible SOC programs with a known primal-dual optimal pair: pick x*, build
// active and inactive blocks around it, then set c = -A^T y* so that strong
// duality certifies the objective value c^T x*.

#include "ccgrid/solver.hpp"

namespace testing_support {

struct PlantedInstance {
  ccgrid::StandardForm form;
  ccgrid::Vec x_star;
  double objective = 0.0;
};

inline PlantedInstance make_planted(std::uint64_t seed) {
  using namespace ccgrid;
  Rng rng(seed);
  const int n = 4 + int(rng.next_below(6));
  Vec x_star(n);
  for (int i = 0; i < n; ++i) x_star[i] = rng.uniform(-2, 2);

  std::vector<Triplet> trips;
  std::vector<double> bvals, yvals;
  std::vector<ConeBlock> blocks;

  auto random_row = [&](int r) {
    for (int j = 0; j < n; ++j) trips.emplace_back(r, j, rng.uniform(-1, 1));
  };
  auto ax = [&](int r) {
    double dot = 0.0;
    for (const auto& t : trips)
      if (t.row() == r) dot += t.value() * x_star[t.col()];
    return dot;
  };

  // a couple of equality rows
  int rows = 0;
  {
    ConeBlock blk{ConeType::Zero, rows, 2, "eq"};
    for (int k = 0; k < 2; ++k) {
      random_row(rows);
      bvals.push_back(ax(rows));  // s = 0 at x*
      yvals.push_back(rng.uniform(-1, 1));
      ++rows;
    }
    blocks.push_back(blk);
  }

  // linear inequalities, a mix of active and inactive
  {
    int count = 3 + int(rng.next_below(4));
    ConeBlock blk{ConeType::NonNeg, rows, count, "lin"};
    for (int k = 0; k < count; ++k) {
      random_row(rows);
      bool active = rng.next_double() < 0.5;
      if (active) {
        bvals.push_back(ax(rows));
        yvals.push_back(rng.uniform(0.1, 1.0));
      } else {
        bvals.push_back(ax(rows) + rng.uniform(0.1, 1.0));
        yvals.push_back(0.0);
      }
      ++rows;
    }
    blocks.push_back(blk);
  }

  // second-order cone blocks
  int soc_count = 1 + int(rng.next_below(3));
  for (int blk_idx = 0; blk_idx < soc_count; ++blk_idx) {
    int dim = 3 + int(rng.next_below(3));
    ConeBlock blk{ConeType::Soc, rows, dim, "soc" + std::to_string(blk_idx)};
    Vec w(dim - 1);
    for (int k = 0; k < dim - 1; ++k) w[k] = rng.uniform(-1, 1);
    bool active = rng.next_double() < 0.6;
    double t = active ? w.norm() : w.norm() + rng.uniform(0.1, 1.0);
    // s rows at x*: (t, w); choose A rows and set b = A x* + s
    random_row(rows);
    bvals.push_back(ax(rows) + t);
    ++rows;
    for (int k = 0; k < dim - 1; ++k) {
      random_row(rows);
      bvals.push_back(ax(rows) + w[k]);
      ++rows;
    }
    // dual on the boundary: y = alpha (||w||, -w), complementary with s
    double alpha = active ? rng.uniform(0.1, 1.0) : 0.0;
    yvals.push_back(alpha * w.norm());
    for (int k = 0; k < dim - 1; ++k) yvals.push_back(-alpha * w[k]);
    blocks.push_back(blk);
  }

  PlantedInstance inst;
  inst.form.num_vars = n;
  inst.form.a.resize(rows, n);
  inst.form.a.setFromTriplets(trips.begin(), trips.end());
  inst.form.b = Eigen::Map<Vec>(bvals.data(), bvals.size());
  inst.form.blocks = blocks;
  Vec y = Eigen::Map<Vec>(yvals.data(), yvals.size());
  inst.form.c = -inst.form.a.transpose() * y;
  inst.x_star = x_star;
  inst.objective = inst.form.c.dot(x_star);
  return inst;
}

}  // namespace testing_support
