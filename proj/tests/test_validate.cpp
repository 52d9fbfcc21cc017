#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "ccgrid/validate.hpp"
#include "test_support.hpp"

using namespace ccgrid;
using namespace testing_support;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// two-bus system with a tight generator limit used for planted violations
struct PlantedValidation {
  NetworkCase nc;
  AdmittanceMatrix y;
  RecourseScheme scheme;
  ProgramSolution sol;
};

PlantedValidation planted_validation() {
  PlantedValidation pv;
  pv.nc = two_bus_case(1);
  pv.nc.generators[0].p_max = 0.25;
  pv.y = build_admittance(pv.nc);
  pv.scheme.gen_p = {1.0};
  pv.scheme.gen_q = {1.0};
  pv.sol.gen_p = Mat::Constant(1, 1, 0.15);  // headroom 0.10
  pv.sol.gen_q = Mat::Constant(1, 1, 0.02);
  pv.sol.es_p = Mat(0, 1);
  pv.sol.es_q = Mat(0, 1);
  pv.sol.es_loss = Mat(0, 1);
  return pv;
}

ScenarioSample shifted_sample(int id, double dp_total) {
  ScenarioSample s;
  s.id = id;
  s.dp = Mat::Zero(2, 1);
  s.dq = Mat::Zero(2, 1);
  s.dp(1, 0) = dp_total;
  return s;
}

}  // namespace

TEST_CASE("wilson interval arithmetic") {
  auto w = wilson_interval(30, 1000);
  CHECK(w.rate == Catch::Approx(0.03));
  CHECK(w.lo == Catch::Approx(0.021).margin(5e-4));
  CHECK(w.hi == Catch::Approx(0.043).margin(5e-4));
  // interval contains the point estimate
  CHECK(w.lo <= w.rate);
  CHECK(w.hi >= w.rate);

  auto zero = wilson_interval(0, 100);
  CHECK(zero.rate == 0.0);
  CHECK(zero.lo == Catch::Approx(0.0).margin(1e-15));
  CHECK(zero.hi > 0.0);
}

TEST_CASE("planted violations are counted at the declared rate") {
  auto pv = planted_validation();
  std::vector<ScenarioSample> pool;
  for (int s = 0; s < 20; ++s)
    pool.push_back(shifted_sample(s, s % 2 == 0 ? 0.2 : 0.0));  // +0.2 breaks p_max
  auto rep = estimate_violation(pv.nc, pv.y, nullptr, pv.sol, pv.scheme, pool);
  CHECK(rep.pool_size == 20);
  CHECK(rep.oracle_failures == 0);
  CHECK(rep.violations == 10);
  CHECK(rep.wilson.rate == Catch::Approx(0.5));
  CHECK(rep.family_counts.at("1k") == 10);
}

TEST_CASE("a feasible solution validates with rate zero") {
  auto pv = planted_validation();
  std::vector<ScenarioSample> pool;
  for (int s = 0; s < 10; ++s) pool.push_back(shifted_sample(s, 0.01));
  auto rep = estimate_violation(pv.nc, pv.y, nullptr, pv.sol, pv.scheme, pool);
  CHECK(rep.violations == 0);
  CHECK(rep.wilson.rate == 0.0);
  CHECK(rep.wilson.hi > 0.0);
}

TEST_CASE("oracle non-convergence is reported separately") {
  auto pv = planted_validation();
  pv.nc.generators[0].p_max = 1e6;  // keep limits out of the way
  std::vector<ScenarioSample> pool = {shifted_sample(0, 80.0)};  // unsolvable transfer
  auto rep = estimate_violation(pv.nc, pv.y, nullptr, pv.sol, pv.scheme, pool);
  CHECK(rep.oracle_failures == 1);
  CHECK(rep.violations == 0);
}

TEST_CASE("lower voltage bound is checked a posteriori") {
  auto pv = planted_validation();
  pv.nc.buses[1].v_min = 1.2;  // impossible floor: every scenario trips it
  std::vector<ScenarioSample> pool = {shifted_sample(0, 0.0)};
  auto rep = estimate_violation(pv.nc, pv.y, nullptr, pv.sol, pv.scheme, pool);
  CHECK(rep.violations == 1);
  CHECK(rep.lower_voltage_scenarios == 1);
  CHECK(rep.worst_lower_voltage_margin > 0.0);
}

TEST_CASE("flattening point detection") {
  std::vector<int> counts = {1, 2, 3, 4, 5};
  SECTION("constant curve flattens at the first count") {
    std::vector<double> obj(5, 100.0);
    CHECK(find_flatten_count(counts, obj, 1e-4) == 1);
  }
  SECTION("last jump defines the flattening point") {
    std::vector<double> obj = {100.0, 105.0, 105.0, 105.5, 105.5};
    CHECK(find_flatten_count(counts, obj, 1e-4) == 4);
  }
  SECTION("tiny wiggles below tolerance are flat") {
    std::vector<double> obj = {100.0, 100.000001, 99.999999, 100.0, 100.0};
    CHECK(find_flatten_count(counts, obj, 1e-4) == 1);
  }
}

TEST_CASE("curve csv emission is deterministic") {
  VerificationCurve curve;
  curve.strategy = "DBS";
  curve.counts = {1, 2, 3};
  curve.objective = {10.0, 10.5, 10.5};
  curve.normalized = {1.0, 1.05, 1.05};
  curve.status = {"optimal", "optimal", "optimal"};
  write_curve_csv(curve, "test_tmp/curve_a.csv");
  write_curve_csv(curve, "test_tmp/curve_b.csv");
  auto a = slurp("test_tmp/curve_a.csv");
  CHECK(a == slurp("test_tmp/curve_b.csv"));
  CHECK(a.find("count,objective,normalized,status") == 0);
}

TEST_CASE("cost and size tables reproduce the reference ratios") {
  write_costs_csv({{"case5", 451710.0, 477487.0}}, "test_tmp/costs.csv");
  auto text = slurp("test_tmp/costs.csv");
  // Ratio2 = OC / BC
  auto pos = text.rfind(',');
  double ratio = std::stod(text.substr(pos + 1));
  CHECK(std::abs(ratio - 1.0570) <= 1e-4);

  write_sizes_csv({{"case9", 1104, 1290, 44529}}, "test_tmp/sizes.csv");
  text = slurp("test_tmp/sizes.csv");
  pos = text.rfind(',');
  double ratio1 = std::stod(text.substr(pos + 1));
  CHECK(std::abs(ratio1 - 0.02479) <= 5e-6);

  // identity case: equal costs give ratio exactly 1
  write_costs_csv({{"id", 100.0, 100.0}}, "test_tmp/costs_id.csv");
  text = slurp("test_tmp/costs_id.csv");
  CHECK(text.find(",1\n") != std::string::npos);
}

TEST_CASE("seed domains keep pools disjoint") {
  auto nc = two_bus_case(2);
  const std::uint64_t seed = 99;
  auto selection_pool = generate_scenario_pool(nc, 0.7, 1.3, 50, seed);
  auto validation_pool =
      generate_scenario_pool(nc, 0.7, 1.3, 50, domain_seed(seed, SeedDomain::Validation));
  int collisions = 0;
  for (const auto& a : selection_pool)
    for (const auto& b : validation_pool)
      if (a.dp == b.dp) ++collisions;
  CHECK(collisions == 0);
  // domain derivation is deterministic
  CHECK(domain_seed(seed, SeedDomain::Validation) ==
        domain_seed(seed, SeedDomain::Validation));
  CHECK(domain_seed(seed, SeedDomain::Validation) !=
        domain_seed(seed, SeedDomain::Training));
}

TEST_CASE("validation json writer is deterministic") {
  ValidationReport rep;
  rep.pool_size = 100;
  rep.violations = 3;
  rep.wilson = wilson_interval(3, 100);
  rep.family_counts["1m"] = 2;
  rep.family_counts["1j"] = 1;
  write_validation_json(rep, "test_tmp/val_a.json");
  write_validation_json(rep, "test_tmp/val_b.json");
  CHECK(slurp("test_tmp/val_a.json") == slurp("test_tmp/val_b.json"));
}
