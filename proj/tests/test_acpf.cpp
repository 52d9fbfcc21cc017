#include <catch2/catch_amalgamated.hpp>

#include "ccgrid/acpf.hpp"
#include "test_support.hpp"

using namespace ccgrid;
using namespace testing_support;

namespace {

VoltageRect random_voltage(int n, int slack, double rho, Rng& rng) {
  VoltageRect v = VoltageRect::flat(n);
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    v.x[2 * i] = rng.uniform(1.0 - rho, 1.0 + rho);
    v.x[2 * i + 1] = rng.uniform(-rho, rho);
  }
  return v;
}

}  // namespace

TEST_CASE("flat voltage on a shunt-free network injects nothing") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  auto v = VoltageRect::flat(nc.n());
  for (int i = 0; i < nc.n(); ++i) {
    auto [p, q] = exact_injection(v, y, i);
    CHECK(std::abs(p) < 1e-14);
    CHECK(std::abs(q) < 1e-14);
  }
}

TEST_CASE("direct sums and quadratic forms agree to 1e-12") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  Rng rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    auto v = random_voltage(nc.n(), -1, 0.08, rng);
    for (int i = 0; i < nc.n(); ++i) {
      auto [p, q] = exact_injection(v, y, i);
      auto forms = injection_forms(y, i);
      CHECK(std::abs(v.x.dot(forms.a * v.x) - p) < 1e-12);
      CHECK(std::abs(v.x.dot(forms.b * v.x) - q) < 1e-12);
    }
    for (const auto& br : nc.branches) {
      auto [p, q] = exact_line_flow(br, v);
      auto lf = line_forms(br);
      Vec xij(4);
      xij << v.e(br.from), v.f(br.from), v.e(br.to), v.f(br.to);
      CHECK(std::abs(xij.dot(lf.a * xij) - p) < 1e-12);
      CHECK(std::abs(xij.dot(lf.b * xij) - q) < 1e-12);
    }
  }
}

TEST_CASE("two-bus cross-check at a fixed voltage") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  VoltageRect v;
  v.x = (Vec(4) << 1.0, 0.0, 0.95, -0.05).finished();
  auto [p1, q1] = exact_injection(v, y, 0);
  auto forms = injection_forms(y, 0);
  CHECK(p1 == Catch::Approx(v.x.dot(forms.a * v.x)).margin(1e-12));
  CHECK(q1 == Catch::Approx(v.x.dot(forms.b * v.x)).margin(1e-12));
  // single shunt-free line carries the entire bus-1 injection
  auto [pf, qf] = exact_line_flow(nc.branches[0], v);
  CHECK(pf == Catch::Approx(p1).margin(1e-12));
  CHECK(qf == Catch::Approx(q1).margin(1e-12));
}

TEST_CASE("injections are homogeneous of degree two") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  Rng rng(7);
  auto v = random_voltage(nc.n(), -1, 0.05, rng);
  VoltageRect v2;
  v2.x = 1.7 * v.x;
  for (int i = 0; i < nc.n(); ++i) {
    auto [p, q] = exact_injection(v, y, i);
    auto [ps, qs] = exact_injection(v2, y, i);
    CHECK(ps == Catch::Approx(1.7 * 1.7 * p).margin(1e-12));
    CHECK(qs == Catch::Approx(1.7 * 1.7 * q).margin(1e-12));
  }
}

TEST_CASE("equal endpoint voltages carry no series flow") {
  Branch br;
  br.from = 0;
  br.to = 1;
  br.r = 0.01;
  br.x = 0.1;
  br.s_max = 1.0;
  auto [p, q] = exact_line_flow(br, 1.02, -0.03, 1.02, -0.03);
  CHECK(std::abs(p) < 1e-15);
  CHECK(std::abs(q) < 1e-15);
}

TEST_CASE("forward plus reverse flow is the nonnegative line loss") {
  auto nc = parse_case(data_path("case5.m"));
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    for (const auto& br : nc.branches) {
      double ei = rng.uniform(0.95, 1.05), fi = rng.uniform(-0.05, 0.05);
      double ej = rng.uniform(0.95, 1.05), fj = rng.uniform(-0.05, 0.05);
      auto [pf, qf] = exact_line_flow(br, ei, fi, ej, fj);
      auto [pr, qr] = exact_line_flow(br, ej, fj, ei, fi);
      CHECK(pf + pr >= -1e-14);  // r >= 0
    }
  }
}

TEST_CASE("conservation: bus injections sum to branch losses") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto v = random_voltage(nc.n(), -1, 0.06, rng);
    double inj = 0.0, inj_q = 0.0;
    for (int i = 0; i < nc.n(); ++i) {
      auto [p, q] = exact_injection(v, y, i);
      inj += p;
      inj_q += q;
    }
    double loss_p = 0.0, loss_q = 0.0;
    for (const auto& br : nc.branches) {
      auto [pf, qf] = exact_line_flow(br, v);
      auto [pr, qr] = exact_line_flow(br, v.e(br.to), v.f(br.to), v.e(br.from), v.f(br.from));
      loss_p += pf + pr;
      loss_q += qf + qr;
    }
    CHECK(inj == Catch::Approx(loss_p).margin(1e-10));
    CHECK(inj_q == Catch::Approx(loss_q).margin(1e-10));
  }
}

TEST_CASE("newton-raphson fixed point at zero injections") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  auto res = solve_power_flow(nc, y, Vec::Zero(2), Vec::Zero(2), VoltageRect::flat(2));
  CHECK(res.converged);
  CHECK(res.iterations <= 1);
  CHECK(res.voltage.e(1) == Catch::Approx(1.0));
}

TEST_CASE("newton-raphson solution satisfies the injections") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  Vec p = (Vec(2) << 0.0, -0.1).finished();
  Vec q = (Vec(2) << 0.0, -0.02).finished();
  auto res = solve_power_flow(nc, y, p, q, VoltageRect::flat(2), 1e-10, 30);
  REQUIRE(res.converged);
  auto [p2, q2] = exact_injection(res.voltage, y, 1);
  CHECK(p2 == Catch::Approx(-0.1).margin(1e-9));
  CHECK(q2 == Catch::Approx(-0.02).margin(1e-9));
  CHECK(res.max_mismatch <= 1e-10);
}

TEST_CASE("newton-raphson reports non-convergence in an infeasible regime") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  Vec p = (Vec(2) << 0.0, -100.0).finished();  // far beyond the line's transfer limit
  Vec q = Vec::Zero(2);
  auto res = solve_power_flow(nc, y, p, q, VoltageRect::flat(2), 1e-10, 25);
  CHECK_FALSE(res.converged);
  CHECK(res.max_mismatch > 1e-10);
}

TEST_CASE("training sampler is deterministic and self-consistent") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  auto a = sample_training_set(nc, y, 40, 0.05, 123);
  auto b = sample_training_set(nc, y, 40, 0.05, 123);
  CHECK(a.x == b.x);
  CHECK(a.bus_p == b.bus_p);

  auto c = sample_training_set(nc, y, 40, 0.05, 124);
  CHECK(a.x != c.x);

  // labels reproduce the quadratic forms exactly
  for (int m = 0; m < a.x.rows(); ++m) {
    VoltageRect v;
    v.x = a.x.row(m).transpose();
    for (int i = 0; i < nc.n(); ++i) {
      auto [p, q] = exact_injection(v, y, i);
      CHECK(std::abs(p - a.bus_p(m, i)) < 1e-12);
      CHECK(std::abs(q - a.bus_q(m, i)) < 1e-12);
    }
  }
}

TEST_CASE("zero-radius sampling degenerates to the flat point") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  auto ds = sample_training_set(nc, y, 5, 0.0, 7);
  for (int m = 0; m < 5; ++m) {
    CHECK(ds.x.row(m) == ds.x.row(0));
    CHECK(ds.bus_p.row(m) == ds.bus_p.row(0));
  }
  // slack is pinned at e=1, f=0
  CHECK(ds.x(0, 2 * ds.slack) == 1.0);
  CHECK(ds.x(0, 2 * ds.slack + 1) == 0.0);
}

TEST_CASE("training set round-trips through its container") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  auto ds = sample_training_set(nc, y, 8, 0.04, 99);
  save_training_set(ds, "test_tmp/dataset.json");
  auto back = load_training_set("test_tmp/dataset.json");
  CHECK(back.n == ds.n);
  CHECK(back.rho == ds.rho);
  CHECK(back.seed == ds.seed);
  CHECK(back.x.isApprox(ds.x));
  CHECK(back.line_q.isApprox(ds.line_q));
}
