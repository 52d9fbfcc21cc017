#include <catch2/catch_amalgamated.hpp>

#include "ccgrid/network.hpp"
#include "test_support.hpp"

using namespace ccgrid;
using namespace testing_support;

TEST_CASE("parse 5-bus case with storage sidecar") {
  auto nc = parse_case(data_path("case5.m"), storage_sidecar_5bus());
  REQUIRE(nc.n() == 5);
  REQUIRE(nc.branches.size() == 6);
  REQUIRE(nc.generators.size() == 5);
  REQUIRE(nc.storage_units.size() == 2);
  CHECK(nc.buses[nc.storage_units[0].bus].id == 3);
  CHECK(nc.buses[nc.storage_units[1].bus].id == 5);
  // 1 MVA / 2 MWh convert to pu on the 100 MVA base
  CHECK(nc.storage_units[0].s_max == Catch::Approx(0.01));
  CHECK(nc.storage_units[0].e_max == Catch::Approx(0.02));
  CHECK(nc.period_count == 24);
  // cost coefficients rescaled to pu
  CHECK(nc.generators[2].c1 == Catch::Approx(18.0 * 100));
  CHECK(nc.generators[2].c2 == Catch::Approx(0.05 * 100 * 100));
}

TEST_CASE("parse minimal 2-bus case without storage") {
  auto nc = two_bus_case();
  REQUIRE(nc.n() == 2);
  CHECK(nc.storage_units.empty());
  CHECK(nc.branches.size() == 1);
  CHECK(nc.slack() == 0);
  CHECK(nc.buses[1].p_load[0] == Catch::Approx(0.10));
}

TEST_CASE("storage at unknown bus is rejected") {
  nlohmann::json cfg;
  cfg["storage"] = nlohmann::json::array(
      {{{"bus", 99}, {"s_max_mva", 1.0}, {"e_max_mwh", 2.0}}});
  auto path = write_temp("case2_badstorage.m", kTwoBusCase);
  CHECK_THROWS_AS(parse_case(path, cfg), ValidationError);
}

TEST_CASE("case without slack bus is rejected") {
  std::string body = kTwoBusCase;
  auto pos = body.find(" 1 3 0");
  body.replace(pos, 6, " 1 1 0");
  auto path = write_temp("case2_noslack.m", body);
  CHECK_THROWS_AS(parse_case(path), ValidationError);
}

TEST_CASE("malformed table row is a parse error") {
  std::string body = "function mpc = bad\nmpc.baseMVA = 100;\nmpc.bus = [\n 1 3 zz;\n];\n";
  auto path = write_temp("case_bad.m", body);
  CHECK_THROWS_AS(parse_case(path), ParseError);
}

TEST_CASE("admittance of a single reactive line") {
  auto nc = two_bus_case();
  auto y = build_admittance(nc);
  // y = 1/(j 0.1): G = 0, B = [[-10, 10], [10, -10]]
  CHECK(Mat(y.G).cwiseAbs().maxCoeff() == Catch::Approx(0.0).margin(1e-15));
  CHECK(Mat(y.B)(0, 0) == Catch::Approx(-10.0));
  CHECK(Mat(y.B)(0, 1) == Catch::Approx(10.0));
  CHECK(Mat(y.B)(1, 0) == Catch::Approx(10.0));
  CHECK(Mat(y.B)(1, 1) == Catch::Approx(-10.0));
}

TEST_CASE("admittance requires branches") {
  auto nc = two_bus_case();
  nc.branches.clear();
  CHECK_THROWS_AS(build_admittance(nc), ValidationError);
}

TEST_CASE("admittance rows of a shunt-free network sum to zero") {
  auto nc = parse_case(data_path("case5.m"));
  auto y = build_admittance(nc);
  Mat g(y.G), b(y.B);
  CHECK(g.transpose() == g);
  CHECK(b.transpose() == b);
  for (int i = 0; i < nc.n(); ++i) {
    CHECK(std::abs(g.row(i).sum()) < 1e-12);
    CHECK(std::abs(b.row(i).sum()) < 1e-12);
  }
}

TEST_CASE("zero-impedance branch is rejected") {
  auto nc = two_bus_case();
  nc.branches[0].r = 0.0;
  nc.branches[0].x = 0.0;
  CHECK_THROWS_AS(build_admittance(nc), ValidationError);
}

TEST_CASE("apply_profile identity and single-entry scaling") {
  auto nc = two_bus_case(3);
  LoadProfile ones;
  ones.multipliers = Mat::Ones(2, 3);
  auto same = apply_profile(nc, ones);
  CHECK(same.buses[1].p_load.isApprox(nc.buses[1].p_load));

  LoadProfile p = ones;
  p.multipliers(0, 0) = 0.7;  // bus 1, hour 1; bus 1 has zero load here
  p.multipliers(1, 2) = 0.7;
  auto scaled = apply_profile(nc, p);
  CHECK(scaled.buses[1].p_load[2] == Catch::Approx(0.7 * nc.buses[1].p_load[2]));
  CHECK(scaled.buses[1].p_load[0] == Catch::Approx(nc.buses[1].p_load[0]));
}

TEST_CASE("apply_profile validates inputs") {
  auto nc = two_bus_case(3);
  LoadProfile wrong;
  wrong.multipliers = Mat::Ones(2, 2);
  CHECK_THROWS_AS(apply_profile(nc, wrong), ValidationError);
  LoadProfile nonpos;
  nonpos.multipliers = Mat::Ones(2, 3);
  nonpos.multipliers(0, 0) = 0.0;
  CHECK_THROWS_AS(apply_profile(nc, nonpos), ValidationError);
}

TEST_CASE("apply_profile is multiplicative in the multiplier") {
  auto nc = two_bus_case(4);
  Rng rng(11);
  LoadProfile a, b, ab;
  a.multipliers = Mat::Ones(2, 4);
  b.multipliers = Mat::Ones(2, 4);
  ab.multipliers = Mat::Ones(2, 4);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 4; ++t) {
      a.multipliers(i, t) = rng.uniform(0.5, 1.5);
      b.multipliers(i, t) = rng.uniform(0.5, 1.5);
      ab.multipliers(i, t) = a.multipliers(i, t) * b.multipliers(i, t);
    }
  auto chained = apply_profile(apply_profile(nc, a), b);
  auto direct = apply_profile(nc, ab);
  for (int i = 0; i < 2; ++i) {
    CHECK(chained.buses[i].p_load.isApprox(direct.buses[i].p_load, 1e-14));
    CHECK(chained.buses[i].q_load.isApprox(direct.buses[i].q_load, 1e-14));
  }
}

TEST_CASE("profile csv reader") {
  auto path = write_temp("profile.csv", "bus,period,multiplier\n1,1,0.7\n2,3,1.2\n");
  auto p = read_profile_csv(path, 2, 3);
  CHECK(p.multipliers(0, 0) == Catch::Approx(0.7));
  CHECK(p.multipliers(1, 2) == Catch::Approx(1.2));
  CHECK(p.multipliers(1, 1) == Catch::Approx(1.0));
  CHECK_THROWS_AS(read_profile_csv(write_temp("bad.csv", "nope\n"), 2, 3), ParseError);
}

TEST_CASE("serialized case round-trips to an identical record") {
  auto nc = parse_case(data_path("case5.m"), storage_sidecar_5bus());
  auto m_path = write_temp("roundtrip.m", write_case_m(nc));
  auto sidecar = write_case_sidecar(nc);
  auto back = parse_case(m_path, sidecar);

  REQUIRE(back.n() == nc.n());
  REQUIRE(back.branches.size() == nc.branches.size());
  REQUIRE(back.generators.size() == nc.generators.size());
  REQUIRE(back.storage_units.size() == nc.storage_units.size());
  CHECK(back.base_mva == nc.base_mva);
  CHECK(back.period_count == nc.period_count);
  for (int i = 0; i < nc.n(); ++i) {
    CHECK(back.buses[i].id == nc.buses[i].id);
    CHECK(back.buses[i].type == nc.buses[i].type);
    CHECK(back.buses[i].v_min == nc.buses[i].v_min);
    CHECK(back.buses[i].v_max == nc.buses[i].v_max);
    CHECK(back.buses[i].p_load == nc.buses[i].p_load);
    CHECK(back.buses[i].q_load == nc.buses[i].q_load);
  }
  for (std::size_t l = 0; l < nc.branches.size(); ++l) {
    CHECK(back.branches[l].from == nc.branches[l].from);
    CHECK(back.branches[l].to == nc.branches[l].to);
    CHECK(back.branches[l].r == nc.branches[l].r);
    CHECK(back.branches[l].x == nc.branches[l].x);
    CHECK(back.branches[l].s_max == nc.branches[l].s_max);
  }
  for (std::size_t g = 0; g < nc.generators.size(); ++g) {
    CHECK(back.generators[g].bus == nc.generators[g].bus);
    CHECK(back.generators[g].c0 == nc.generators[g].c0);
    CHECK(back.generators[g].c1 == nc.generators[g].c1);
    CHECK(back.generators[g].c2 == nc.generators[g].c2);
    CHECK(back.generators[g].p_max == nc.generators[g].p_max);
    CHECK(back.generators[g].omega_q == nc.generators[g].omega_q);
  }
  for (std::size_t u = 0; u < nc.storage_units.size(); ++u) {
    CHECK(back.storage_units[u].bus == nc.storage_units[u].bus);
    CHECK(back.storage_units[u].s_max == nc.storage_units[u].s_max);
    CHECK(back.storage_units[u].e_max == nc.storage_units[u].e_max);
    CHECK(back.storage_units[u].e0 == nc.storage_units[u].e0);
    CHECK(back.storage_units[u].omega_p == nc.storage_units[u].omega_p);
  }
}
