#include "kinreg/kinreg.h"

#include <cstring>
#include <new>

#include "kinreg/error.hpp"
#include "kinreg/parallel.hpp"
#include "kinreg/scenario.hpp"

struct kr_kernel {
  kinreg::CollisionKernel kernel;
};
struct kr_domain {
  kinreg::ConvexDomain domain;
};
struct kr_scenario {
  kinreg::Scenario scenario;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_key;

template <class F>
kr_status guarded(F&& body) {
  last_error.clear();
  last_key.clear();
  try {
    body();
    return KR_OK;
  } catch (const kinreg::ConfigError& e) {
    last_error = e.what();
    last_key = e.key();
    return KR_CONFIG;
  } catch (const kinreg::Error& e) {
    last_error = e.what();
    return static_cast<kr_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return KR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) throw kinreg::Error(kinreg::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

kinreg::Vec3 vec(const double v[3]) { return {v[0], v[1], v[2]}; }

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* kr_last_error(void) { return last_error.c_str(); }
const char* kr_last_error_key(void) { return last_key.c_str(); }
const char* kr_version(void) { return "0.1.0"; }
void kr_string_free(char* s) { delete[] s; }

kr_status kr_set_threads(int threads) {
  return guarded([&] {
    if (threads < 1) throw kinreg::Error(kinreg::ErrorCode::InvalidArgument, "threads must be at least 1");
    kinreg::set_thread_count(static_cast<unsigned>(threads));
  });
}

kr_status kr_kernel_create(double gamma, double delta, double beta0, double c1, double c2, kr_kernel** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    kinreg::PotentialModel m;
    m.gamma = gamma;
    m.delta = delta;
    m.beta0 = beta0;
    m.c1 = c1;
    m.c2 = c2;
    m.validate();
    *out = new kr_kernel{kinreg::CollisionKernel(m)};
  });
}

void kr_kernel_destroy(kr_kernel* k) { delete k; }

kr_status kr_kernel_frequency(const kr_kernel* k, double speed, double* nu) {
  return guarded([&] {
    need(k, "kernel");
    need(nu, "nu");
    if (!(speed >= 0.0)) throw kinreg::Error(kinreg::ErrorCode::InvalidArgument, "speed must be nonnegative");
    *nu = k->kernel.frequency(speed);
  });
}

kr_status kr_kernel_value(const kr_kernel* k, const double zeta[3], const double z[3], double* value) {
  return guarded([&] {
    need(k, "kernel");
    need(zeta, "zeta");
    need(z, "z");
    need(value, "value");
    *value = k->kernel.value(vec(zeta), vec(z));
  });
}

kr_status kr_kernel_bounds(const kr_kernel* k, double* nu0, double* nu1) {
  return guarded([&] {
    need(k, "kernel");
    need(nu0, "nu0");
    need(nu1, "nu1");
    *nu0 = k->kernel.nu_lower();
    *nu1 = k->kernel.nu_upper();
  });
}

kr_status kr_domain_ball(const double center[3], double radius, kr_domain** out) {
  return guarded([&] {
    need(center, "center");
    need(out, "out");
    *out = nullptr;
    *out = new kr_domain{kinreg::ConvexDomain::ball(vec(center), radius)};
  });
}

kr_status kr_domain_ellipsoid(const double center[3], const double semi_axes[3], kr_domain** out) {
  return guarded([&] {
    need(center, "center");
    need(semi_axes, "semi_axes");
    need(out, "out");
    *out = nullptr;
    *out = new kr_domain{kinreg::ConvexDomain::ellipsoid(vec(center), vec(semi_axes))};
  });
}

void kr_domain_destroy(kr_domain* d) { delete d; }

kr_status kr_domain_exit(const kr_domain* d, const double x[3], const double zeta[3], double* tau, double point[3]) {
  return guarded([&] {
    need(d, "domain");
    need(x, "x");
    need(zeta, "zeta");
    need(tau, "tau");
    need(point, "point");
    const kinreg::BoundaryPoint p = d->domain.exit_point(vec(x), vec(zeta));
    *tau = d->domain.exit_time(vec(x), vec(zeta));
    point[0] = p.point.x;
    point[1] = p.point.y;
    point[2] = p.point.z;
  });
}

kr_status kr_scenario_load(const char* path, kr_scenario** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new kr_scenario{kinreg::load_scenario(path)};
  });
}

kr_status kr_scenario_parse(const char* json, kr_scenario** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = nullptr;
    kinreg::Json j;
    try {
      j = kinreg::Json::parse(json);
    } catch (const kinreg::Json::parse_error& e) {
      throw kinreg::ConfigError("<text>", std::string("not valid JSON: ") + e.what());
    }
    *out = new kr_scenario{kinreg::parse_scenario(j)};
  });
}

void kr_scenario_destroy(kr_scenario* s) { delete s; }

kr_status kr_scenario_set_seed(kr_scenario* s, uint64_t seed) {
  return guarded([&] {
    need(s, "scenario");
    s->scenario.seed = seed;
  });
}

kr_status kr_scenario_set_output(kr_scenario* s, const char* dir) {
  return guarded([&] {
    need(s, "scenario");
    need(dir, "dir");
    s->scenario.output_dir = dir;
  });
}

kr_status kr_run(const kr_scenario* s, kr_mode mode, const char* out_dir, int* passed, char** summary_json) {
  return guarded([&] {
    need(s, "scenario");
    need(passed, "passed");
    if (summary_json) *summary_json = nullptr;
    const kinreg::RunMode m = mode == KR_MODE_SOLVE ? kinreg::RunMode::Solve : kinreg::RunMode::Verify;
    const kinreg::ScenarioOutcome o = kinreg::run_scenario(s->scenario, m, out_dir ? out_dir : s->scenario.output_dir);
    *passed = o.passed ? 1 : 0;
    if (summary_json) *summary_json = dup(o.summary(s->scenario).dump(2));
  });
}

kr_status kr_list_checks(char** json) {
  return guarded([&] {
    need(json, "json");
    kinreg::Json list = kinreg::Json::array();
    for (const auto& e : kinreg::check_registry())
      list.push_back({{"name", e.name}, {"statement", e.statement}, {"needs_field", e.needs_field}});
    *json = dup(list.dump(2));
  });
}

}  // extern "C"
