#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kinreg/analysis.hpp"
#include "kinreg/geometry.hpp"
#include "kinreg/kernel.hpp"
#include "kinreg/report.hpp"
#include "kinreg/transport.hpp"

namespace kinreg {

struct DomainSpec {
  std::string shape = "ball";  // ball | ellipsoid
  Point center{0.0, 0.0, 0.0};
  double radius = 1.0;
  Vec3 semi_axes{1.0, 1.0, 1.0};

  ConvexDomain build() const;
  Json to_json() const;
};

struct DatumSpec {
  std::string kind = "zero";  // zero | constant | holder
  double value = 0.0;         // constant
  double amplitude = 1.0;     // holder family: A e^{-|eta|^2}(1 + B (...)^(sigma/2))
  double bump = 1.0;
  double sigma = 0.4;

  BoundaryDatum build(const ConvexDomain& domain, std::uint64_t seed) const;
  Json to_json() const;
};

struct SolveSpec {
  double tolerance = 1e-10;
  int max_iterations = 60;
  bool asserted = true;  // a diverged solve fails the run
};

struct CheckSpec {
  std::string name;
  Json params = Json::object();
  bool asserted = true;
};

/// One run description: body, gas, data, discretization, solver and check list.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::string output_dir = "kinreg_out";
  DomainSpec domain;
  PotentialModel potential;
  DatumSpec datum;
  PhaseGridSpec grid;
  SolveSpec solve;
  std::vector<CheckSpec> checks;

  Json to_json() const;
};

/// Validates and converts a parsed config. Throws ConfigError naming the offending key.
Scenario parse_scenario(const Json& config);
Scenario load_scenario(const std::string& path);

// ---------------------------------------------------------------------------
// Check registry

struct RunContext {
  const Scenario& scenario;
  std::shared_ptr<const TransportProblem> problem;
  const DistributionField* field = nullptr;  // set for checks that need a solved field
};

struct CheckEntry {
  std::string name;
  std::string statement;  // the inequality or identity under test
  bool needs_field = false;
  std::function<CheckReport(const RunContext&, const Json& params, std::uint64_t seed)> run;
};

const std::vector<CheckEntry>& check_registry();
/// Throws ConfigError("checks", ...) for unknown names.
const CheckEntry& find_check(const std::string& name);

// ---------------------------------------------------------------------------
// Runs

enum class RunMode { Solve, Verify };

struct CheckOutcome {
  CheckReport report;
  bool asserted = true;
  double seconds = 0.0;
};

struct ScenarioOutcome {
  std::optional<ConvergenceReport> solve;
  bool solve_asserted = true;
  std::vector<CheckOutcome> checks;
  bool passed = true;  // every asserted item passed
  /// Deterministic summary (no timings).
  Json summary(const Scenario& scenario) const;
  Json timings() const;
};

/// Solve mode: solve and write the field checkpoint. Verify mode: solve when any
/// listed check needs the field, then run the checks. With a non-empty `out_dir`
/// writes scenario.json, summary.json, timing.json, solve.json, field.json/.csv and
/// checks/<name>.json/.csv.
ScenarioOutcome run_scenario(const Scenario& scenario, RunMode mode, const std::string& out_dir);

}  // namespace kinreg
