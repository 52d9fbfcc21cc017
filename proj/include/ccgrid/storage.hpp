#pragma once

#include <cmath>
#include <vector>

#include "ccgrid/network.hpp"

namespace ccgrid {

// Battery loss model with the bus voltage magnitude frozen at 1 pu:
// P_loss = r_eq P^2 + r_cvt Q^2.
inline double exact_loss(double p, double q, const StorageUnit& unit) {
  return unit.r_eq() * p * p + unit.r_cvt * q * q;
}

enum class HullVariant {
  RScaled,  // J = diag(sqrt(2 r_eq), sqrt(2 r_cvt), 1, 1); cone expands to the loss epigraph
  Literal,  // J = diag(sqrt2, sqrt2, 1, 1) as printed; presupposes unit resistances
};

// Convex hull of the storage set over the lifted variable
// z = [P_ES, Q_ES, P_loss, 1]: two second-order cone cuts and one linear cap.
//   ||J z||  <= b^T z          (loss epigraph)
//   ||Ji z|| <= b^T z + m      (battery-resistance cut, as printed)
//   k^T z    <= 2 m            (loss cap: P_loss <= m = r_eq S_max^2)
struct HullConstraintSet {
  Vec j_diag;   // diagonal of J
  Vec ji_diag;  // diagonal of J_i
  Vec b;        // [0, 0, 1, 1]
  Vec k;        // [0, 0, 1, m]
  double m = 0.0;
};

inline HullConstraintSet build_hull_constraints(const StorageUnit& unit,
                                                HullVariant variant = HullVariant::RScaled) {
  HullConstraintSet h;
  h.m = unit.r_eq() * unit.s_max * unit.s_max;
  h.b = (Vec(4) << 0, 0, 1, 1).finished();
  h.k = (Vec(4) << 0, 0, 1, h.m).finished();
  if (variant == HullVariant::RScaled) {
    h.j_diag = (Vec(4) << std::sqrt(2.0 * unit.r_eq()), std::sqrt(2.0 * unit.r_cvt), 1, 1)
                   .finished();
  } else {
    h.j_diag = (Vec(4) << std::sqrt(2.0), std::sqrt(2.0), 1, 1).finished();
  }
  h.ji_diag = (Vec(4) << 0, std::sqrt(2.0 * unit.r_batt), 1, 1).finished();
  return h;
}

// Signed residuals of the three hull constraints at a point; <= 0 means
// satisfied.
struct HullResiduals {
  double epigraph;  // ||Jz|| - b^T z
  double battery;   // ||Ji z|| - b^T z - m
  double cap;       // k^T z - 2 m
};

inline HullResiduals hull_residuals(const HullConstraintSet& h, double p, double q,
                                    double loss) {
  Vec z = (Vec(4) << p, q, loss, 1.0).finished();
  HullResiduals r;
  r.epigraph = (h.j_diag.cwiseProduct(z)).norm() - h.b.dot(z);
  r.battery = (h.ji_diag.cwiseProduct(z)).norm() - h.b.dot(z) - h.m;
  r.cap = h.k.dot(z) - 2.0 * h.m;
  return r;
}

struct EnergyViolation {
  int period;     // 1-based
  double energy;  // E_t
  double margin;  // distance past the violated bound (positive)
};

// Cumulative-sum energy bound: E_t = E_0 + dt * sum_{k<=t} inflow_k must stay
// in [E_min, E_max] at every period. `inflow` is the rate at which stored
// energy rises; callers dispatching grid-side quantities pass
// -(P_ES + P_loss).
inline std::vector<EnergyViolation> energy_trajectory_check(const Vec& inflow,
                                                            const StorageUnit& unit,
                                                            double dt) {
  std::vector<EnergyViolation> out;
  double e = unit.e0;
  for (int t = 0; t < inflow.size(); ++t) {
    e += dt * inflow[t];
    if (e < unit.e_min)
      out.push_back({t + 1, e, unit.e_min - e});
    else if (e > unit.e_max)
      out.push_back({t + 1, e, e - unit.e_max});
  }
  return out;
}

// Apparent-power rating check; positive margin means feasible slack
// (S_max^2 - P^2 - Q^2).
inline double capacity_check(double p, double q, const StorageUnit& unit) {
  return unit.s_max * unit.s_max - p * p - q * q;
}

}  // namespace ccgrid
