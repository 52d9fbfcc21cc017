#include <catch2/catch_amalgamated.hpp>

#include "ccgrid/solver.hpp"
#include "planted.hpp"

using namespace ccgrid;
using namespace testing_support;

namespace {

StandardForm one_dim_lp() {
  // min x s.t. x >= 1
  StandardForm sf;
  sf.num_vars = 1;
  sf.c = (Vec(1) << 1.0).finished();
  sf.a.resize(1, 1);
  sf.a.insert(0, 0) = -1.0;
  sf.b = (Vec(1) << -1.0).finished();
  sf.blocks = {{ConeType::NonNeg, 0, 1, "lin"}};
  return sf;
}

SolveOptions tight() {
  SolveOptions o;
  o.abs_tol = 1e-10;
  o.rel_tol = 1e-10;
  return o;
}

}  // namespace

TEST_CASE("one-dimensional lp") {
  auto [sol, rep] = solve(one_dim_lp(), tight());
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == Catch::Approx(1.0).margin(1e-8));
  CHECK(rep.primal_objective == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("norm bound of a constant vector") {
  // min t s.t. ||(3,4)|| <= t
  StandardForm sf;
  sf.num_vars = 1;
  sf.c = (Vec(1) << 1.0).finished();
  sf.a.resize(3, 1);
  sf.a.insert(0, 0) = -1.0;
  sf.b = (Vec(3) << 0.0, 3.0, 4.0).finished();
  sf.blocks = {{ConeType::Soc, 0, 3, "soc"}};
  auto [sol, rep] = solve(sf, tight());
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == Catch::Approx(5.0).margin(1e-8));
}

TEST_CASE("rotated-cone epigraph of a square") {
  // min u s.t. x^2 <= u, via (u, 1/2, x) in the rotated cone
  StandardForm sf;
  sf.num_vars = 2;  // (x, u)
  sf.c = (Vec(2) << 0.0, 1.0).finished();
  sf.a.resize(3, 2);
  sf.a.insert(0, 1) = -1.0;
  sf.a.insert(2, 0) = -1.0;
  sf.b = (Vec(3) << 0.0, 0.5, 0.0).finished();
  sf.blocks = {{ConeType::RSoc, 0, 3, "rsoc"}};
  auto [sol, rep] = solve(sf, tight());
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.primal_objective == Catch::Approx(0.0).margin(1e-8));
  CHECK(sol.x[0] == Catch::Approx(0.0).margin(1e-4));
}

TEST_CASE("planted instances solve to the certified objective") {
  SolveOptions opts;
  opts.abs_tol = 1e-9;
  opts.rel_tol = 1e-9;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = make_planted(seed);
    auto [sol, rep] = solve(inst.form, opts);
    INFO("seed " << seed);
    REQUIRE(rep.status == SolveStatus::Optimal);
    double scale = std::max(1.0, std::abs(inst.objective));
    CHECK(std::abs(rep.primal_objective - inst.objective) / scale <= 1e-6);
  }
}

TEST_CASE("solution accepted by solve passes the independent checker") {
  for (std::uint64_t seed = 2; seed <= 6; ++seed) {
    auto inst = make_planted(seed);
    SolveOptions opts;
    opts.abs_tol = 1e-8;
    opts.rel_tol = 1e-8;
    auto [sol, rep] = solve(inst.form, opts);
    REQUIRE(rep.status == SolveStatus::Optimal);
    auto chk = check_solution(inst.form, sol.x, 1e-7);  // 10x looser
    CHECK(chk.feasible);
  }
}

TEST_CASE("checker flags a perturbed solution and names the block") {
  auto inst = make_planted(3);
  auto chk_ok = check_solution(inst.form, inst.x_star, 1e-9);
  CHECK(chk_ok.feasible);

  Vec bad = inst.x_star;
  bad[0] += 0.1;
  auto chk = check_solution(inst.form, bad, 1e-6);
  CHECK_FALSE(chk.feasible);
  bool named = false;
  for (const auto& v : chk.by_tag)
    if (v.violation > 1e-6) named = true;
  CHECK(named);
}

TEST_CASE("checker accepts an empty constraint set") {
  StandardForm sf;
  sf.num_vars = 2;
  sf.c = Vec::Zero(2);
  sf.a.resize(0, 2);
  sf.b = Vec(0);
  auto chk = check_solution(sf, (Vec(2) << 1.0, -1.0).finished());
  CHECK(chk.feasible);
  CHECK(chk.worst_violation == 0.0);
}

TEST_CASE("fixed instance and options give identical iterate results") {
  auto inst = make_planted(7);
  SolveOptions opts;
  auto [a, ra] = solve(inst.form, opts);
  auto [b, rb] = solve(inst.form, opts);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(ra.iterations == rb.iterations);
}

TEST_CASE("scaling the objective scales the optimum and keeps the argmin") {
  auto inst = make_planted(9);
  SolveOptions opts;
  opts.abs_tol = 1e-9;
  opts.rel_tol = 1e-9;
  auto [sol1, rep1] = solve(inst.form, opts);
  StandardForm scaled = inst.form;
  scaled.c *= 3.5;
  auto [sol2, rep2] = solve(scaled, opts);
  REQUIRE(rep1.status == SolveStatus::Optimal);
  REQUIRE(rep2.status == SolveStatus::Optimal);
  CHECK(rep2.primal_objective ==
        Catch::Approx(3.5 * rep1.primal_objective).margin(1e-5));
  CHECK((sol1.x - sol2.x).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("contradictory bounds are reported infeasible") {
  // x >= 1 and x <= 0
  StandardForm sf;
  sf.num_vars = 1;
  sf.c = (Vec(1) << 1.0).finished();
  sf.a.resize(2, 1);
  sf.a.insert(0, 0) = -1.0;
  sf.a.insert(1, 0) = 1.0;
  sf.b = (Vec(2) << -1.0, 0.0).finished();
  sf.blocks = {{ConeType::NonNeg, 0, 2, "lin"}};
  SolveOptions opts;
  opts.max_iter = 20000;
  auto [sol, rep] = solve(sf, opts);
  CHECK(rep.status == SolveStatus::Infeasible);
}

TEST_CASE("an unconstrained descent direction is reported unbounded") {
  StandardForm sf;
  sf.num_vars = 1;
  sf.c = (Vec(1) << 1.0).finished();
  sf.a.resize(0, 1);
  sf.b = Vec(0);
  SolveOptions opts;
  opts.max_iter = 20000;
  auto [sol, rep] = solve(sf, opts);
  CHECK(rep.status == SolveStatus::Unbounded);
}
