#include "kinreg/scenario.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "kinreg/error.hpp"
#include "kinreg/geometry_checks.hpp"

namespace kinreg {

namespace {

// ---------------------------------------------------------------------------
// Config reading. Every accessor names the full key path in its error.

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void only_keys(const Json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(join(prefix, k), "unknown key");
  }
}

const Json* lookup(const Json& obj, const std::string& prefix, const std::string& key, bool required) {
  if (obj.contains(key)) return &obj.at(key);
  if (required) throw ConfigError(join(prefix, key), "missing required key");
  return nullptr;
}

double number(const Json& obj, const std::string& prefix, const std::string& key, std::optional<double> fallback) {
  const Json* v = lookup(obj, prefix, key, !fallback.has_value());
  if (!v) return *fallback;
  if (!v->is_number()) throw ConfigError(join(prefix, key), "expected a number");
  return v->get<double>();
}

int integer(const Json& obj, const std::string& prefix, const std::string& key, int fallback, int min_value) {
  const Json* v = lookup(obj, prefix, key, false);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(join(prefix, key), "expected an integer");
  const int n = v->get<int>();
  if (n < min_value) throw ConfigError(join(prefix, key), "must be at least " + std::to_string(min_value));
  return n;
}

bool boolean(const Json& obj, const std::string& prefix, const std::string& key, bool fallback) {
  const Json* v = lookup(obj, prefix, key, false);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(prefix, key), "expected true or false");
  return v->get<bool>();
}

std::string text(const Json& obj, const std::string& prefix, const std::string& key,
                 std::optional<std::string> fallback) {
  const Json* v = lookup(obj, prefix, key, !fallback.has_value());
  if (!v) return *fallback;
  if (!v->is_string()) throw ConfigError(join(prefix, key), "expected a string");
  return v->get<std::string>();
}

Vec3 vec3(const Json& obj, const std::string& prefix, const std::string& key, std::optional<Vec3> fallback) {
  const Json* v = lookup(obj, prefix, key, !fallback.has_value());
  if (!v) return *fallback;
  if (!v->is_array() || v->size() != 3 || !(*v)[0].is_number() || !(*v)[1].is_number() || !(*v)[2].is_number())
    throw ConfigError(join(prefix, key), "expected an array of three numbers");
  return {(*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>()};
}

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

// Check parameters: `params` with defaults, errors keyed "checks.<name>.<param>".
struct Params {
  const Json& j;
  std::string prefix;
  double num(const char* key, double fallback) const { return number(j, prefix, key, fallback); }
  std::size_t count(const char* key, int fallback) const {
    return static_cast<std::size_t>(integer(j, prefix, key, fallback, 1));
  }
  Vec3 vec(const char* key, const Vec3& fallback) const { return vec3(j, prefix, key, fallback); }
  std::uint64_t seed(std::uint64_t fallback) const {
    const Json* v = lookup(j, prefix, "seed", false);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ConfigError(join(prefix, "seed"), "expected a nonnegative integer");
    return v->get<std::uint64_t>();
  }
};

VelocityQuadrature quadrature_param(const Params& p, const char* key, const VelocityQuadrature& fallback) {
  const Json* v = lookup(p.j, p.prefix, key, false);
  if (!v) return fallback;
  if (!v->is_array() || v->size() != 4) throw ConfigError(join(p.prefix, key), "expected [r_max, radial, polar, azimuth]");
  try {
    return VelocityQuadrature((*v)[0].get<double>(), (*v)[1].get<int>(), (*v)[2].get<int>(), (*v)[3].get<int>());
  } catch (const Json::exception&) {
    throw ConfigError(join(p.prefix, key), "expected [r_max, radial, polar, azimuth]");
  }
}

HolderSampling sampling_param(const Params& p, std::uint64_t seed) {
  HolderSampling s;
  s.half = p.count("pairs", 10000) / 2;
  if (s.half == 0) throw ConfigError(join(p.prefix, "pairs"), "must be at least 2");
  s.d0_min = p.num("d0_min", 0.1);
  s.speed_scale = p.num("speed_scale", 1.0);
  s.seed = seed;
  return s;
}

double sigma_param(const Params& p, const Scenario& sc) {
  return p.num("sigma", sc.datum.kind == "holder" ? sc.datum.sigma : 0.4);
}

CollisionKernel scenario_kernel(const RunContext& c) { return c.problem->kernel(); }

}  // namespace

// ---------------------------------------------------------------------------
// Specs

ConvexDomain DomainSpec::build() const {
  if (shape == "ball") return ConvexDomain::ball(center, radius);
  return ConvexDomain::ellipsoid(center, semi_axes);
}

Json DomainSpec::to_json() const {
  Json j;
  j["shape"] = shape;
  j["center"] = vec_json(center);
  if (shape == "ball") {
    j["radius"] = radius;
  } else {
    j["semi_axes"] = vec_json(semi_axes);
  }
  return j;
}

BoundaryDatum DatumSpec::build(const ConvexDomain& domain, std::uint64_t seed) const {
  if (kind == "zero") return BoundaryDatum::zero();
  if (kind == "constant") return BoundaryDatum::constant(value);
  return BoundaryDatum::holder_family(domain, amplitude, bump, sigma, seed);
}

Json DatumSpec::to_json() const {
  Json j;
  j["kind"] = kind;
  if (kind == "constant") j["value"] = value;
  if (kind == "holder") {
    j["amplitude"] = amplitude;
    j["bump"] = bump;
    j["sigma"] = sigma;
  }
  return j;
}

Json Scenario::to_json() const {
  Json j;
  j["name"] = name;
  j["seed"] = seed;
  j["output"] = output_dir;
  j["domain"] = domain.to_json();
  j["potential"] = {{"gamma", potential.gamma}, {"delta", potential.delta}, {"beta0", potential.beta0},
                    {"c1", potential.c1},       {"c2", potential.c2}};
  j["datum"] = datum.to_json();
  j["grid"] = {{"spatial_nodes", grid.spatial_nodes},
               {"r_max", grid.r_max},
               {"radial_nodes", grid.radial_nodes},
               {"angular_nodes", grid.angular_nodes},
               {"collision_nodes", {grid.collision_radial, grid.collision_polar, grid.collision_azimuth}},
               {"path_order", grid.path_order},
               {"path_panels", grid.path_panels},
               {"small_speed", grid.small_speed}};
  j["solve"] = {{"tolerance", solve.tolerance}, {"max_iterations", solve.max_iterations}, {"asserted", solve.asserted}};
  Json checks_json = Json::array();
  for (const auto& c : checks) checks_json.push_back({{"name", c.name}, {"params", c.params}, {"asserted", c.asserted}});
  j["checks"] = checks_json;
  return j;
}

Scenario parse_scenario(const Json& config) {
  only_keys(config, "", {"name", "seed", "output", "domain", "potential", "datum", "grid", "solve", "checks"});
  Scenario sc;
  sc.name = text(config, "", "name", std::string("scenario"));
  if (const Json* s = lookup(config, "", "seed", false)) {
    if (!s->is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    sc.seed = s->get<std::uint64_t>();
  }
  sc.output_dir = text(config, "", "output", std::string("kinreg_out"));

  const Json& dom = *lookup(config, "", "domain", true);
  only_keys(dom, "domain", {"shape", "center", "radius", "semi_axes"});
  sc.domain.shape = text(dom, "domain", "shape", std::nullopt);
  sc.domain.center = vec3(dom, "domain", "center", Vec3{0.0, 0.0, 0.0});
  if (sc.domain.shape == "ball") {
    sc.domain.radius = number(dom, "domain", "radius", std::nullopt);
    if (!(sc.domain.radius > 0.0)) throw ConfigError("domain.radius", "must be positive");
  } else if (sc.domain.shape == "ellipsoid") {
    sc.domain.semi_axes = vec3(dom, "domain", "semi_axes", std::nullopt);
    const Vec3& a = sc.domain.semi_axes;
    if (!(a.x > 0.0 && a.y > 0.0 && a.z > 0.0)) throw ConfigError("domain.semi_axes", "must be positive");
  } else {
    throw ConfigError("domain.shape", "expected \"ball\" or \"ellipsoid\"");
  }

  const Json& pot = *lookup(config, "", "potential", true);
  only_keys(pot, "potential", {"gamma", "delta", "beta0", "c1", "c2"});
  sc.potential.gamma = number(pot, "potential", "gamma", std::nullopt);
  sc.potential.delta = number(pot, "potential", "delta", std::nullopt);
  sc.potential.beta0 = number(pot, "potential", "beta0", std::nullopt);
  sc.potential.c1 = number(pot, "potential", "c1", std::nullopt);
  sc.potential.c2 = number(pot, "potential", "c2", 1.0);
  try {
    sc.potential.validate();
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    throw ConfigError("potential." + msg.substr(0, msg.find(' ')), msg.substr(msg.find(' ') + 1));
  }

  const Json& dat = *lookup(config, "", "datum", true);
  only_keys(dat, "datum", {"kind", "value", "amplitude", "bump", "sigma"});
  sc.datum.kind = text(dat, "datum", "kind", std::nullopt);
  if (sc.datum.kind == "constant") {
    sc.datum.value = number(dat, "datum", "value", std::nullopt);
  } else if (sc.datum.kind == "holder") {
    sc.datum.amplitude = number(dat, "datum", "amplitude", 1.0);
    sc.datum.bump = number(dat, "datum", "bump", 1.0);
    sc.datum.sigma = number(dat, "datum", "sigma", 0.4);
    if (!(sc.datum.sigma > 0.0 && sc.datum.sigma < 0.5)) throw ConfigError("datum.sigma", "must lie in (0, 1/2)");
  } else if (sc.datum.kind != "zero") {
    throw ConfigError("datum.kind", "expected \"zero\", \"constant\" or \"holder\"");
  }

  if (const Json* g = lookup(config, "", "grid", false)) {
    only_keys(*g, "grid", {"spatial_nodes", "r_max", "radial_nodes", "angular_nodes", "collision_nodes",
                           "path_order", "path_panels", "small_speed"});
    PhaseGridSpec& s = sc.grid;
    s.spatial_nodes = integer(*g, "grid", "spatial_nodes", s.spatial_nodes, 3);
    s.r_max = number(*g, "grid", "r_max", s.r_max);
    if (!(s.r_max > 0.0)) throw ConfigError("grid.r_max", "must be positive");
    s.radial_nodes = integer(*g, "grid", "radial_nodes", s.radial_nodes, 2);
    s.angular_nodes = integer(*g, "grid", "angular_nodes", s.angular_nodes, 2);
    if (const Json* c = lookup(*g, "grid", "collision_nodes", false)) {
      if (!c->is_array() || c->size() != 3) throw ConfigError("grid.collision_nodes", "expected [radial, polar, azimuth]");
      int* dst[3] = {&s.collision_radial, &s.collision_polar, &s.collision_azimuth};
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*c)[i].is_number_integer() || (*c)[i].get<int>() < 2)
          throw ConfigError("grid.collision_nodes", "entries must be integers >= 2");
        *dst[i] = (*c)[i].get<int>();
      }
    }
    s.path_order = integer(*g, "grid", "path_order", s.path_order, 1);
    s.path_panels = integer(*g, "grid", "path_panels", s.path_panels, 1);
    s.small_speed = number(*g, "grid", "small_speed", s.small_speed);
  }

  if (const Json* s = lookup(config, "", "solve", false)) {
    only_keys(*s, "solve", {"tolerance", "max_iterations", "asserted"});
    sc.solve.tolerance = number(*s, "solve", "tolerance", sc.solve.tolerance);
    if (!(sc.solve.tolerance > 0.0)) throw ConfigError("solve.tolerance", "must be positive");
    sc.solve.max_iterations = integer(*s, "solve", "max_iterations", sc.solve.max_iterations, 1);
    sc.solve.asserted = boolean(*s, "solve", "asserted", sc.solve.asserted);
  }

  const Json* checks = lookup(config, "", "checks", false);
  if (!checks || (checks->is_string() && checks->get<std::string>() == "all")) {
    for (const auto& e : check_registry()) sc.checks.push_back({e.name, Json::object(), true});
  } else if (checks->is_array()) {
    for (std::size_t i = 0; i < checks->size(); ++i) {
      const Json& c = (*checks)[i];
      const std::string where = "checks[" + std::to_string(i) + "]";
      CheckSpec spec;
      if (c.is_string()) {
        spec.name = c.get<std::string>();
      } else {
        only_keys(c, where, {"name", "params", "asserted"});
        spec.name = text(c, where, "name", std::nullopt);
        if (const Json* p = lookup(c, where, "params", false)) {
          if (!p->is_object()) throw ConfigError(where + ".params", "expected an object");
          spec.params = *p;
        }
        spec.asserted = boolean(c, where, "asserted", true);
      }
      try {
        find_check(spec.name);
      } catch (const ConfigError&) {
        throw ConfigError(where + ".name", "unknown check '" + spec.name + "'");
      }
      sc.checks.push_back(std::move(spec));
    }
  } else {
    throw ConfigError("checks", "expected \"all\" or an array of check names");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Registry

namespace {

std::vector<CheckEntry> build_registry() {
  std::vector<CheckEntry> r;
  auto add = [&](std::string name, std::string statement, bool needs_field, auto run) {
    r.push_back({std::move(name), std::move(statement), needs_field, run});
  };

  add("nu_exactness", "collision frequency equals its closed forms at gamma = 0 and gamma = 1", false,
      [](const RunContext& c, const Json& j, std::uint64_t) {
        const Params p{j, "checks.nu_exactness"};
        return nu_exactness_check(p.num("beta0", c.scenario.potential.beta0));
      });
  add("frequency_bounds", "nu0 (1+|z|)^gamma <= nu(|z|) <= nu1 (1+|z|)^gamma", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.frequency_bounds"};
        return frequency_bounds_check(scenario_kernel(c), p.count("fresh", 200), p.seed(seed));
      });
  add("caflisch_decay", "singular Gaussian integral I(eta) decays like (1+|eta|)^-1", false,
      [](const RunContext&, const Json& j, std::uint64_t) {
        const Params p{j, "checks.caflisch_decay"};
        return caflisch_decay_check(p.num("epsilon", 1.0), p.num("a1", 0.25), p.num("a2", 0.25));
      });
  add("nu_derivative", "|nu'(s)| <= C (1+s)^(gamma-1)", false,
      [](const RunContext& c, const Json& j, std::uint64_t) {
        const Params p{j, "checks.nu_derivative"};
        PotentialModel m = c.scenario.potential;
        m.gamma = p.num("gamma", m.gamma);
        return nu_derivative_check(m, p.num("s_max", 20.0), static_cast<int>(p.count("points", 201)));
      });
  add("grad_K", "||grad K(f)||_p <= C ||f||_p", false, [](const RunContext& c, const Json& j, std::uint64_t seed) {
    const Params p{j, "checks.grad_K"};
    const std::string pn = text(j, p.prefix, "p", std::string("inf"));
    NormExponent e = NormExponent::Infinity;
    if (pn == "1") {
      e = NormExponent::One;
    } else if (pn == "2") {
      e = NormExponent::Two;
    } else if (pn != "inf") {
      throw ConfigError(p.prefix + ".p", "expected \"1\", \"2\" or \"inf\"");
    }
    return grad_K_check(scenario_kernel(c), quadrature_param(p, "inner", VelocityQuadrature(12.0, 12, 12, 12)),
                        quadrature_param(p, "outer", VelocityQuadrature(5.0, 5, 4, 8)), e,
                        static_cast<int>(p.count("family_size", 20)), p.seed(seed));
  });
  add("k_decay", "|K(f)(z)| <= C ||f||_{L*} (1+|z|)^(-(3-gamma)/2)", false,
      [](const RunContext& c, const Json& j, std::uint64_t) {
        const Params p{j, "checks.k_decay"};
        PotentialModel m = c.scenario.potential;
        m.gamma = p.num("gamma", m.gamma);
        return k_decay_check(CollisionKernel(m), quadrature_param(p, "quadrature", VelocityQuadrature(12.0, 16, 16, 16)));
      });
  add("parallax", "angle x0-y-x1 < (pi/4) d^(1-a) when |y-x0| > 2 d^a, d = |x0-x1| <= 1", false,
      [](const RunContext&, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.parallax"};
        const std::size_t n = p.count("samples", 100000);
        std::vector<double> as = {0.3, 0.5, 0.7};
        if (const Json* a = lookup(j, p.prefix, "a", false)) {
          if (!a->is_array() || a->empty()) throw ConfigError(p.prefix + ".a", "expected a list of exponents");
          as = a->get<std::vector<double>>();
        }
        CheckReport merged;
        merged.check_name = "parallax";
        merged.params = {{"samples", n}, {"a", as}};
        merged.seed = p.seed(seed);
        merged.columns = {"a", "d", "distance_y_x0", "theta", "bound"};
        merged.passed = true;
        Json per = Json::array();
        for (std::size_t i = 0; i < as.size(); ++i) {
          CheckReport one = check_parallax_bound(n, as[i], merged.seed + i);
          merged.proposition = one.proposition;
          merged.samples += one.samples;
          merged.excluded += one.excluded;
          merged.violations += one.violations;
          merged.empirical_sup = std::max(merged.empirical_sup, one.empirical_sup);
          merged.passed = merged.passed && one.passed;
          per.push_back({{"a", as[i]}, {"violations", one.violations}, {"max_theta_over_bound", one.empirical_sup},
                         {"excluded", one.excluded}});
          for (auto& row : one.rows) {
            row.insert(row.begin(), as[i]);
            merged.rows.push_back(std::move(row));
          }
        }
        merged.details["per_exponent"] = per;
        return merged;
      });
  add("exit_continuity", "|p(x,z)-p(y,z)| + |tau(x,z)-tau(y,z)||z| <= C (1+1/d0) |x-y|", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.exit_continuity"};
        return check_exit_continuity(c.problem->domain(), p.count("samples", 10000), p.seed(seed));
      });
  add("angle_continuity", "|p(x,z1)-p(x,z2)| <= C (1+1/d0) angle(z1, z2)", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.angle_continuity"};
        return check_angle_continuity(c.problem->domain(), p.count("samples", 10000), p.seed(seed));
      });
  add("segment_distance", "|zX| <= (R/d0) d(z) on the chord from x to its exit point X", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.segment_distance"};
        return check_segment_distance(c.problem->domain(), p.count("samples", 10000), p.seed(seed));
      });
  add("pure_transport", "with c1 = 0 the solver returns f(p(x,z),z) e^(-nu tau(x,z))", false,
      [](const RunContext& c, const Json& j, std::uint64_t) {
        const Params p{j, "checks.pure_transport"};
        return pure_transport_check(*c.problem, p.num("tolerance", 1e-10));
      });
  add("decomposition", "f = I + II + III at grid phase nodes", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.decomposition"};
        return decomposition_check(*c.field, p.count("probes", 20), p.num("tolerance", 1e-3), p.seed(seed));
      });
  add("g_dual_form", "G over (s, z') equals G over (y, z') after the change of variables", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.g_dual_form"};
        const DistributionField carrier(c.problem);
        return g_dual_form_check(carrier, p.count("probes", 10), p.num("tolerance", 1e-4), p.seed(seed));
      });
  add("mixing_holder", "|G(x0,z) - G(x1,z)| <= C ||f||_inf |x0-x1|^(1/2)", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.mixing_holder"};
        return mixing_holder_check(*c.field, p.vec("zeta", {0.6, -0.3, 0.5}), p.vec("base", c.problem->domain().center()),
                                   static_cast<int>(p.count("levels", 8)), p.count("pairs", 64), p.seed(seed));
      });
  add("g_velocity_lipschitz", "|G(x0,z1) - G(x0,z2)| <= C ||f||_inf |z1-z2|", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.g_velocity_lipschitz"};
        return g_velocity_lipschitz_check(*c.field, p.vec("x0", c.problem->domain().center()), p.count("pairs", 50),
                                          p.seed(seed));
      });
  add("convolution_gain", "||f~(x,.)||^2_{L*} <= C (|x|^-(2-alpha) chi) * ||f(x,.)||^2_{L*}", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.convolution_gain"};
        return convolution_gain_check(*c.field, p.num("alpha", 0.5), p.count("probes", 20), p.seed(seed));
      });
  add("boundary_preservation", "I and II are weighted Hoelder with weights (1+1/d0)^2 and (1+1/d0)^3", false,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.boundary_preservation"};
        return boundary_preservation_check(c.problem, sigma_param(p, c.scenario), sampling_param(p, p.seed(seed)));
      });
  add("holder_modulus", "|f(x,z) - f(y,xi)| <= C (1+1/d0)^3 (|z-xi|^2 + |x-y|^2)^(sigma/2)", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.holder_modulus"};
        const std::uint64_t s = p.seed(seed);
        const HolderReport h = holder_modulus(*c.field, sigma_param(p, c.scenario), sampling_param(p, s));
        CheckReport rep = h.to_check("holder_modulus",
                                     "|f(x,z) - f(y,xi)| <= C (1+1/d0)^3 (|z-xi|^2 + |x-y|^2)^(sigma/2)", s);
        rep.params["d0_min"] = p.num("d0_min", 0.1);
        return rep;
      });
  add("embedding", "|f(X,z)| <= 2 (3/(4 pi nu0))^(s/(3+2s)) M^(3/(3+2s)) ||f||^(2s/(3+2s))_{L^inf_x L*}", true,
      [](const RunContext& c, const Json& j, std::uint64_t seed) {
        const Params p{j, "checks.embedding"};
        return embedding_check(*c.field, p.count("samples", 1000), p.seed(seed));
      });
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

const std::vector<CheckEntry>& check_registry() {
  static const std::vector<CheckEntry> registry = build_registry();
  return registry;
}

const CheckEntry& find_check(const std::string& name) {
  for (const auto& e : check_registry()) {
    if (e.name == name) return e;
  }
  throw ConfigError("checks", "unknown check '" + name + "'");
}

Json ScenarioOutcome::summary(const Scenario& scenario) const {
  Json j;
  j["scenario"] = scenario.name;
  j["seed"] = scenario.seed;
  if (solve) {
    j["solve"] = {{"status", solve->status},
                  {"iterations", solve->iterations},
                  {"residual", solve->residual},
                  {"asserted", solve_asserted}};
  } else {
    j["solve"] = nullptr;
  }
  Json list = Json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.report.check_name},
                    {"passed", c.report.passed},
                    {"asserted", c.asserted},
                    {"sup_or_violations", c.report.to_json()["sup_or_violations"]},
                    {"stability_ratio", c.report.to_json()["stability_ratio"]}});
  }
  j["checks"] = list;
  j["passed"] = passed;
  return j;
}

Json ScenarioOutcome::timings() const {
  Json j;
  if (solve) j["solve_seconds"] = solve->seconds;
  Json c = Json::object();
  for (const auto& o : checks) c[o.report.check_name] = o.seconds;
  j["checks"] = c;
  return j;
}

ScenarioOutcome run_scenario(const Scenario& scenario, RunMode mode, const std::string& out_dir) {
  const ConvexDomain domain = scenario.domain.build();
  auto problem = std::make_shared<const TransportProblem>(domain, CollisionKernel(scenario.potential),
                                                          scenario.datum.build(domain, scenario.seed), scenario.grid);
  bool need_field = mode == RunMode::Solve;
  if (mode == RunMode::Verify) {
    for (const auto& c : scenario.checks) need_field = need_field || find_check(c.name).needs_field;
  }

  namespace fs = std::filesystem;
  const bool write = !out_dir.empty();
  const fs::path out(out_dir);
  if (write) {
    fs::create_directories(out);
    write_json(out / "scenario.json", scenario.to_json());
  }

  ScenarioOutcome outcome;
  outcome.solve_asserted = scenario.solve.asserted;
  std::optional<DistributionField> field;
  if (need_field) {
    SolveResult r = picard_solve(problem, scenario.solve.tolerance, scenario.solve.max_iterations);
    if (scenario.solve.asserted && r.report.status != "converged") outcome.passed = false;
    if (write) {
      write_json(out / "solve.json", r.report.to_json());
      save_checkpoint(r.field, (out / "field.json").string(), (out / "field.csv").string());
    }
    outcome.solve = r.report;
    field.emplace(std::move(r.field));
  }

  if (mode == RunMode::Verify) {
    const RunContext ctx{scenario, problem, field ? &*field : nullptr};
    std::map<std::string, int> seen;
    if (write) fs::create_directories(out / "checks");
    for (const auto& spec : scenario.checks) {
      const CheckEntry& entry = find_check(spec.name);
      const auto t0 = std::chrono::steady_clock::now();
      CheckOutcome o;
      o.asserted = spec.asserted;
      try {
        o.report = entry.run(ctx, spec.params, scenario.seed);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        o.report.check_name = entry.name;
        o.report.proposition = entry.statement;
        o.report.passed = false;
        o.report.details["error"] = e.what();
      }
      o.seconds = seconds_since(t0);
      if (o.asserted && !o.report.passed) outcome.passed = false;
      if (write) {
        const int n = ++seen[entry.name];
        const std::string stem = n == 1 ? entry.name : entry.name + "_" + std::to_string(n);
        write_json(out / "checks" / (stem + ".json"), o.report.to_json());
        if (!o.report.columns.empty()) o.report.write_csv((out / "checks" / (stem + ".csv")).string());
      }
      outcome.checks.push_back(std::move(o));
    }
  }

  if (write) {
    write_json(out / "summary.json", outcome.summary(scenario));
    write_json(out / "timing.json", outcome.timings());
  }
  return outcome;
}

}  // namespace kinreg
