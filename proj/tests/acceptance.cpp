// Acceptance run: the full-suite scenario plus the extra cases the criteria
// name (ellipsoid geometry, gamma = 0 decay). One PASS/FAIL line per criterion.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "kinreg/geometry_checks.hpp"
#include "kinreg/scenario.hpp"

using namespace kinreg;

namespace {

int failures = 0;

void line(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double num(const Json& j, const char* key) { return j.at(key).is_number() ? j.at(key).get<double>() : INFINITY; }

}  // namespace

int main(int argc, char** argv) {
  const std::string config = argc > 1 ? argv[1] : "scenarios/full_suite.json";
  const std::string out = argc > 2 ? argv[2] : "acceptance_out";
  std::filesystem::remove_all(out);
  const Scenario sc = load_scenario(config);
  std::printf("scenario %s (%zu checks), output in %s\n", sc.name.c_str(), sc.checks.size(), out.c_str());
  const ScenarioOutcome run = run_scenario(sc, RunMode::Verify, out);
  std::map<std::string, const CheckReport*> rep;
  for (const auto& c : run.checks) rep[c.report.check_name] = &c.report;
  auto get = [&](const char* name) -> const CheckReport& {
    auto it = rep.find(name);
    if (it == rep.end()) {
      std::printf("scenario did not run %s\n", name);
      std::exit(2);
    }
    return *it->second;
  };

  {
    const auto& r = get("nu_exactness");
    line(1, "nu exactness", r.passed,
         fmt("gamma=0 rel err %.2e (tol 1e-10), gamma=1 at s=0 rel err %.2e (tol 1e-8)",
             num(r.details, "maxwell_max_relative_error"),
             num(r.details, "hard_sphere_zero_speed_relative_error")));
  }
  {
    const auto& r = get("frequency_bounds");
    line(2, "frequency bounds", r.passed && r.violations == 0 && r.samples >= 200,
         fmt("%.0f fresh speeds in [0,50], %.0f violations, smallest margin %.2e", double(r.samples),
             double(r.violations), num(r.details, "smallest_relative_margin")));
  }
  {
    const auto& r = get("caflisch_decay");
    line(3, "Caflisch decay", r.passed,
         fmt("tail max/min %.3f (<= 3), increases > 1%%: %.0f", num(r.details, "tail_max_over_min"),
             num(r.details, "increases_beyond_one_percent")));
  }
  {
    const auto& r = get("parallax");
    line(4, "parallax", r.passed && r.violations == 0,
         fmt("%.0f triples over a in {0.3,0.5,0.7}, %.0f violations, max theta/bound %.3f", double(r.samples),
             double(r.violations), r.empirical_sup));
  }
  {
    // Ball from the scenario, ellipsoid here.
    const ConvexDomain ell = ConvexDomain::ellipsoid({0, 0, 0}, {1.5, 1.0, 0.75});
    const CheckReport seg = check_segment_distance(ell, 10000, sc.seed);
    const CheckReport ex = check_exit_continuity(ell, 10000, sc.seed);
    const CheckReport an = check_angle_continuity(ell, 10000, sc.seed);
    const auto& bseg = get("segment_distance");
    const auto& bex = get("exit_continuity");
    const auto& ban = get("angle_continuity");
    const bool ok = seg.passed && ex.passed && an.passed && bseg.passed && bex.passed && ban.passed &&
                    seg.violations == 0 && bseg.violations == 0;
    line(5, "geometry (ball, ellipsoid)", ok,
         fmt("segment violations %.0f/%.0f; exit drift %.3f/%.3f", double(bseg.violations), double(seg.violations),
             bex.stability_ratio, ex.stability_ratio) +
             fmt("; angle drift %.3f/%.3f (<= 1.2)", ban.stability_ratio, an.stability_ratio));
  }
  {
    const auto& d = get("decomposition");
    const auto& t = get("pure_transport");
    double max_ratio = 0.0;
    for (double q : run.solve->update_ratios) max_ratio = std::max(max_ratio, q);
    const bool conv = run.solve->status == "converged" && max_ratio < 1.0;
    line(6, "solver self-consistency", conv && d.passed && t.passed,
         fmt("%.0f iterations, max update ratio %.3f; decomposition %.2e (<= 1e-3); pure transport %.2e (<= 1e-10)",
             run.solve->iterations, max_ratio, d.empirical_sup, t.empirical_sup));
  }
  {
    const auto& r = get("mixing_holder");
    line(7, "mixing Hoelder-1/2", r.passed,
         fmt("max/median %.3f (<= 10); exponent-1 max/median %.3f; anchored max/median %.3f",
             num(r.details, "max_over_median"), num(r.details, "exponent_one_max_over_median"),
             num(r.details, "anchored_max_over_median")));
  }
  {
    const auto& g = get("g_velocity_lipschitz");
    const auto& k = get("grad_K");
    line(8, "G velocity-Lipschitz, grad K", g.passed && k.passed,
         fmt("G sup %.3e drift %.3f; grad K sup %.3e drift %.3f (<= 1.2)", g.empirical_sup, g.stability_ratio,
             k.empirical_sup, k.stability_ratio));
  }
  {
    const auto& k5 = get("k_decay");
    PotentialModel m0 = sc.potential;
    m0.gamma = 0.0;
    const CheckReport k0 = k_decay_check(CollisionKernel(m0), VelocityQuadrature(12.0, 16, 16, 16));
    line(9, "K decay (gamma 0, 0.5)", k0.passed && k5.passed,
         fmt("gaussian tail slope %.1f (gamma 0, need <= -1.3), %.1f (gamma 0.5, need <= -1.05); weighted sups %.3f, %.3f",
             num(k0.details, "gaussian_tail_slope"), num(k5.details, "gaussian_tail_slope"), k0.empirical_sup,
             k5.empirical_sup));
  }
  {
    const auto& r = get("convolution_gain");
    line(10, "gain of integrability", r.passed,
         fmt("C11-hat %.3e over %.0f probes, drift under 2x refinement %.3f", r.empirical_sup, double(r.samples),
             r.stability_ratio));
  }
  {
    const auto& h = get("holder_modulus");
    const auto& b = get("boundary_preservation");
    line(11, "Hoelder modulus, boundary terms", h.passed && b.passed,
         fmt("f sup %.3e drift %.3f; I drift %.3f; II drift %.3f", h.empirical_sup, h.stability_ratio,
             num(b.details, "I_stability_ratio"), num(b.details, "II_stability_ratio")));
  }
  {
    const auto& r = get("embedding");
    line(12, "Gamma_- embedding", r.passed && r.violations == 0,
         fmt("%.0f points, %.0f violations, max |f|/bound %.3f", double(r.samples), double(r.violations),
             num(r.details, "max_abs_over_bound")));
  }
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
