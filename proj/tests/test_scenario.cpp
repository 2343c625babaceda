#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "kinreg/error.hpp"
#include "kinreg/scenario.hpp"

using namespace kinreg;

namespace {

Json minimal() {
  return Json::parse(R"({
    "domain": {"shape": "ball", "radius": 1.0},
    "potential": {"gamma": 0.5, "delta": 0.5, "beta0": 1.0, "c1": 0.15},
    "datum": {"kind": "zero"},
    "grid": {"spatial_nodes": 5, "radial_nodes": 6, "angular_nodes": 12, "collision_nodes": [8, 8, 8]}
  })");
}

std::string failing_key(const Json& j) {
  try {
    parse_scenario(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults fill in and every registered check is selected") {
  const Scenario s = parse_scenario(minimal());
  CHECK(s.potential.c2 == 1.0);
  CHECK(s.grid.r_max == 12.0);
  CHECK(s.solve.tolerance == 1e-10);
  CHECK(s.checks.size() == check_registry().size());
  CHECK(s.domain.build().contains({0.9, 0, 0}));
}

TEST_CASE("config errors name the offending key") {
  Json j = minimal();
  j["potential"].erase("gamma");
  CHECK(failing_key(j) == "potential.gamma");

  j = minimal();
  j["potential"]["gamma"] = 1.5;
  CHECK(failing_key(j) == "potential.gamma");
  j = minimal();
  j["potential"]["delta"] = 0.0;
  CHECK(failing_key(j) == "potential.delta");
  j = minimal();
  j["potential"]["c1"] = "lots";
  CHECK(failing_key(j) == "potential.c1");

  j = minimal();
  j["domain"]["shape"] = "torus";
  CHECK(failing_key(j) == "domain.shape");
  j = minimal();
  j["domain"] = {{"shape", "ellipsoid"}};
  CHECK(failing_key(j) == "domain.semi_axes");
  j = minimal();
  j["datum"] = {{"kind", "constant"}};
  CHECK(failing_key(j) == "datum.value");
  j = minimal();
  j["grid"]["colision_nodes"] = 3;
  CHECK(failing_key(j) == "grid.colision_nodes");
  j = minimal();
  j["checks"] = Json::array({"parallax", "no_such_check"});
  CHECK(failing_key(j) == "checks[1].name");
  j = minimal();
  j["checks"] = Json::array({{{"name", "parallax"}, {"params", {{"samples", -3}}}}});
  CHECK_NOTHROW(parse_scenario(j));  // params are read when the check runs

  CHECK_THROWS_AS(load_scenario("/nonexistent/config.json"), Error);
}

TEST_CASE("registry is stable and every entry states its estimate") {
  const auto& r = check_registry();
  CHECK(r.size() >= 10);
  std::set<std::string> names;
  for (const auto& e : r) {
    CHECK_FALSE(e.statement.empty());
    names.insert(e.name);
  }
  CHECK(names.size() == r.size());
  CHECK(find_check("holder_modulus").needs_field);
  CHECK_THROWS_AS(find_check("nope"), ConfigError);
}

TEST_CASE("bad check parameters surface as config errors at run time") {
  Json j = minimal();
  j["checks"] = Json::array({{{"name", "parallax"}, {"params", {{"samples", -3}}}}});
  try {
    run_scenario(parse_scenario(j), RunMode::Verify, "");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "checks.parallax.samples");
  }
}

TEST_CASE("zero data runs and writes a report bundle") {
  Json j = minimal();
  j["checks"] = Json::array({"pure_transport", "decomposition", {{"name", "embedding"}, {"params", {{"samples", 50}}}},
                             {{"name", "embedding"}, {"params", {{"samples", 20}}}, {"asserted", false}}});
  const Scenario s = parse_scenario(j);
  const auto dir = std::filesystem::temp_directory_path() / "kinreg_test_scenario";
  std::filesystem::remove_all(dir);
  const ScenarioOutcome o = run_scenario(s, RunMode::Verify, dir.string());
  REQUIRE(o.solve);
  CHECK(o.solve->status == "converged");
  CHECK(o.passed);
  CHECK(o.checks.size() == 4);
  CHECK_FALSE(o.checks[3].asserted);
  for (const char* f : {"scenario.json", "summary.json", "timing.json", "solve.json", "field.json", "field.csv",
                        "checks/pure_transport.json", "checks/embedding.json", "checks/embedding_2.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  std::ifstream in(dir / "summary.json");
  const Json summary = Json::parse(in);
  CHECK(summary["passed"] == true);
  CHECK_FALSE(summary.contains("seconds"));

  // Solve mode skips the checks.
  const ScenarioOutcome solve_only = run_scenario(s, RunMode::Solve, "");
  CHECK(solve_only.checks.empty());
  CHECK(solve_only.solve);
}

TEST_CASE("a check that raises a library error fails without aborting the run") {
  Json j = minimal();
  j["checks"] = Json::array({{{"name", "mixing_holder"}, {"params", {{"base", {0.97, 0.0, 0.0}}}}}, "pure_transport"});
  const ScenarioOutcome o = run_scenario(parse_scenario(j), RunMode::Verify, "");
  REQUIRE(o.checks.size() == 2);
  CHECK_FALSE(o.checks[0].report.passed);
  CHECK(o.checks[0].report.details.contains("error"));
  CHECK(o.checks[1].report.passed);
  CHECK_FALSE(o.passed);
}

TEST_CASE("an unconverged solve fails the run only when asserted") {
  Json j = minimal();
  j["datum"] = {{"kind", "constant"}, {"value", 1.0}};
  j["solve"] = {{"tolerance", 1e-14}, {"max_iterations", 1}};
  j["checks"] = Json::array();
  CHECK_FALSE(run_scenario(parse_scenario(j), RunMode::Solve, "").passed);
  j["solve"]["asserted"] = false;
  const ScenarioOutcome o = run_scenario(parse_scenario(j), RunMode::Solve, "");
  CHECK(o.solve->status != "converged");
  CHECK(o.passed);
}
