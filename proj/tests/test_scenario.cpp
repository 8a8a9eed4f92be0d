#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rhg/scenario.hpp"

using namespace rhg;

namespace {

bool specs_equal(const GameSpec& a, const GameSpec& b) {
  if (a.n_agents() != b.n_agents() || a.horizon != b.horizon || a.mode != b.mode) return false;
  for (std::size_t v = 0; v < a.n_agents(); ++v) {
    if (frobenius_norm(a.dynamics[v].A - b.dynamics[v].A) != 0.0) return false;
    if (frobenius_norm(a.dynamics[v].B - b.dynamics[v].B) != 0.0) return false;
    if (frobenius_norm(a.costs[v].W - b.costs[v].W) != 0.0) return false;
    if (norm2(a.costs[v].w - b.costs[v].w) != 0.0) return false;
    if (frobenius_norm(a.costs[v].Q_self - b.costs[v].Q_self) != 0.0) return false;
    if (norm2(a.costs[v].q - b.costs[v].q) != 0.0) return false;
    for (const auto& [j, m] : a.costs[v].Q_cross) {
      auto it = b.costs[v].Q_cross.find(j);
      if (it == b.costs[v].Q_cross.end()) return false;
      if (frobenius_norm(m - it->second) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("builtins: known names, unknown rejected with the list") {
  for (const auto& name : builtin_names()) CHECK(is_builtin(name));
  try {
    load_builtin("nope");
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("battery_charging") != std::string::npos);
    CHECK(msg.find("illustrative_stable") != std::string::npos);
  }
}

TEST_CASE("builtin parameters: illustrative pair shape and weight story") {
  Scenario uns = load_builtin("illustrative_unstable");
  CHECK(uns.spec.n_agents() == 2);
  CHECK(uns.spec.horizon == 10);
  CHECK(uns.spec.costs[0].W(0, 0) == doctest::Approx(20.0));
  CHECK(uns.spec.costs[0].W(1, 1) == doctest::Approx(0.05));
  Scenario st = load_builtin("illustrative_stable");
  CHECK(st.spec.costs[0].W(0, 0) == doctest::Approx(1.0));
  // published stable local blocks sit on the diagonal of the shared state map
  Matrix A1 = uns.spec.dynamics[0].A.block(0, 0, 2, 2);
  CHECK(spectral_radius(A1) == doctest::Approx(0.954).epsilon(0.0011));
  Matrix A2 = uns.spec.dynamics[0].A.block(2, 2, 2, 2);
  CHECK(spectral_radius(A2) == doctest::Approx(0.727).epsilon(0.0011));
}

TEST_CASE("builtin parameters: battery ranges and structure") {
  Scenario sc = load_builtin("battery_charging");
  CHECK(sc.spec.n_agents() == 3);
  CHECK(sc.spec.mode == GameMode::decoupled);
  REQUIRE(sc.schedule.has_value());
  for (std::size_t v = 0; v < 3; ++v) {
    const double A = sc.spec.dynamics[v].A(0, 0);
    const double B = sc.spec.dynamics[v].B(0, 0);
    CHECK(A >= 0.955);
    CHECK(A <= 0.98);
    CHECK(B >= 0.7);
    CHECK(B <= 0.9);
    CHECK(sc.schedule->gamma1[v] >= 0.03);
    CHECK(sc.schedule->gamma1[v] <= 0.05);
    CHECK(sc.schedule->gamma2[v] >= 0.01);
    CHECK(sc.schedule->gamma2[v] <= 0.2);
    CHECK(sc.schedule->gamma3[v] >= 0.01);
    CHECK(sc.schedule->gamma3[v] <= 0.02);
    CHECK(sc.schedule->x_ref[v] >= 15.0);
    CHECK(sc.schedule->x_ref[v] <= 20.0);
  }
  CHECK(sc.schedule->u_max == doctest::Approx(7.0));
  CHECK(sc.schedule->u_min == doctest::Approx(-7.0));
  // coupling rows present per stage after condensation
  CondensedGame g = condense(sc.spec);
  CHECK(g.Z.coupling_rows() == 2 * sc.spec.horizon);
  for (double lo : g.Z.lower) CHECK(std::isfinite(lo));
}

TEST_CASE("battery redraw with a seed stays within the published ranges") {
  Scenario a = load_builtin("battery_charging", 9);
  Scenario b = load_builtin("battery_charging", 9);
  CHECK(specs_equal(a.spec, b.spec));  // deterministic redraw
  Scenario c = load_builtin("battery_charging", 10);
  CHECK_FALSE(specs_equal(a.spec, c.spec));
  for (std::size_t v = 0; v < 3; ++v) {
    const double A = c.spec.dynamics[v].A(0, 0);
    CHECK(A >= 0.955);
    CHECK(A <= 0.98);
  }
}

TEST_CASE("round trip: builtins serialize and reload to identical specs") {
  for (const auto& name : builtin_names()) {
    Scenario sc = load_builtin(name);
    std::string text = scenario_to_json(sc);
    Scenario back = parse_scenario_json(text);
    CHECK(specs_equal(sc.spec, back.spec));
    CHECK(back.steps == sc.steps);
    CHECK(norm2(back.x0 - sc.x0) == doctest::Approx(0.0));
  }
}

TEST_CASE("schema errors carry the offending field") {
  // row-length mismatch in B
  const char* bad = R"({
    "horizon": 3,
    "agents": [{
      "A": [[0.5, 0.0], [0.0, 0.5]],
      "B": [[1.0], [1.0, 2.0]],
      "W": [[0.0, 0.0], [0.0, 0.0]],
      "cost": {"type": "quadratic", "Q_self": [[1.0]]}
    }]
  })";
  try {
    parse_scenario_json(bad);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("agents[0].B") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_scenario_json("{not json"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario_json(R"({"horizon": 1, "agents": [{}]})"), ScenarioError);
}

TEST_CASE("trajectory csv: header and row count") {
  Trajectory traj;
  traj.states = {{1.0, 2.0}, {0.5, 1.0}, {0.25, 0.5}};
  traj.inputs = {{0.1}, {0.2}};
  traj.residuals = {1e-9, 2e-9};
  traj.iterations = {3, 2};
  traj.min_slacks = {0.4, 0.3};
  const std::string path = "test_traj_out.csv";
  write_trajectory_csv(path, traj);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x0,x1,u0,residual,min_slack,V");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  std::remove(path.c_str());
}

TEST_CASE("load_scenario: file path round trip") {
  Scenario sc = load_builtin("illustrative_stable");
  const std::string path = "test_scenario_out.json";
  {
    std::ofstream out(path);
    out << scenario_to_json(sc);
  }
  Scenario back = load_scenario(path);
  CHECK(specs_equal(sc.spec, back.spec));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_scenario("does_not_exist.json"), ScenarioError);
}
