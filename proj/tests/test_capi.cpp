#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "doctest.h"
#include "kinreg/kinreg.h"

TEST_CASE("kernel handle") {
  kr_kernel* k = nullptr;
  REQUIRE(kr_kernel_create(0.0, 0.5, 1.0, 0.15, 1.0, &k) == KR_OK);
  double nu = 0.0;
  REQUIRE(kr_kernel_frequency(k, 3.0, &nu) == KR_OK);
  CHECK(nu == doctest::Approx(std::pow(std::numbers::pi, 1.5)).epsilon(1e-10));

  const double a[3] = {0.3, -0.2, 1.0}, b[3] = {-0.5, 0.4, 0.1};
  double kab = 0.0, kba = 0.0;
  REQUIRE(kr_kernel_value(k, a, b, &kab) == KR_OK);
  REQUIRE(kr_kernel_value(k, b, a, &kba) == KR_OK);
  CHECK(kab == kba);
  CHECK(kab > 0.0);
  CHECK(kr_kernel_value(k, a, a, &kab) == KR_SINGULARITY);
  CHECK(std::strlen(kr_last_error()) > 0);

  double nu0 = 0.0, nu1 = 0.0;
  REQUIRE(kr_kernel_bounds(k, &nu0, &nu1) == KR_OK);
  CHECK(nu0 <= nu1);
  CHECK(kr_kernel_frequency(k, -1.0, &nu) == KR_INVALID_ARGUMENT);
  CHECK(kr_kernel_frequency(nullptr, 1.0, &nu) == KR_INVALID_ARGUMENT);
  kr_kernel_destroy(k);

  k = reinterpret_cast<kr_kernel*>(1);
  CHECK(kr_kernel_create(1.5, 0.5, 1.0, 0.15, 1.0, &k) == KR_DOMAIN);
  CHECK(k == nullptr);
  CHECK(std::string(kr_last_error()).find("gamma") != std::string::npos);
}

TEST_CASE("domain handle") {
  const double c[3] = {0, 0, 0};
  kr_domain* d = nullptr;
  REQUIRE(kr_domain_ball(c, 1.0, &d) == KR_OK);
  const double x[3] = {0.5, 0, 0}, zeta[3] = {2, 0, 0};
  double tau = 0.0, p[3];
  REQUIRE(kr_domain_exit(d, x, zeta, &tau, p) == KR_OK);
  CHECK(tau == doctest::Approx(0.75));
  CHECK(p[0] == doctest::Approx(-1.0));
  kr_domain_destroy(d);

  const double axes[3] = {2, 1, 1};
  REQUIRE(kr_domain_ellipsoid(c, axes, &d) == KR_OK);
  REQUIRE(kr_domain_exit(d, c, zeta, &tau, p) == KR_OK);
  CHECK(tau == doctest::Approx(1.0));
  kr_domain_destroy(d);
  CHECK(kr_domain_ball(c, -1.0, &d) != KR_OK);
}

TEST_CASE("scenario handle and run") {
  kr_scenario* s = nullptr;
  CHECK(kr_scenario_parse(R"({"domain": {"shape": "ball", "radius": 1}, "datum": {"kind": "zero"},
                              "potential": {"delta": 0.5, "beta0": 1, "c1": 0.1}})",
                          &s) == KR_CONFIG);
  CHECK(std::string(kr_last_error_key()) == "potential.gamma");
  CHECK(kr_scenario_parse("{not json", &s) == KR_CONFIG);

  REQUIRE(kr_scenario_parse(R"({"domain": {"shape": "ball", "radius": 1}, "datum": {"kind": "constant", "value": 1},
      "potential": {"gamma": 0.5, "delta": 0.5, "beta0": 1, "c1": 0.0},
      "grid": {"spatial_nodes": 5, "radial_nodes": 6, "angular_nodes": 12, "collision_nodes": [8, 8, 8]},
      "checks": ["pure_transport", "nu_exactness"]})",
                            &s) == KR_OK);
  REQUIRE(kr_scenario_set_seed(s, 3) == KR_OK);
  int passed = 0;
  char* summary = nullptr;
  REQUIRE(kr_run(s, KR_MODE_VERIFY, "", &passed, &summary) == KR_OK);
  CHECK(passed == 1);
  REQUIRE(summary != nullptr);
  CHECK(std::string(summary).find("\"pure_transport\"") != std::string::npos);
  kr_string_free(summary);
  CHECK(kr_run(s, KR_MODE_SOLVE, "", &passed, nullptr) == KR_OK);
  kr_scenario_destroy(s);

  CHECK(kr_scenario_load("/nonexistent.json", &s) == KR_IO);
  CHECK(kr_run(nullptr, KR_MODE_SOLVE, "", &passed, nullptr) == KR_INVALID_ARGUMENT);
}

TEST_CASE("registry listing and misc") {
  char* json = nullptr;
  REQUIRE(kr_list_checks(&json) == KR_OK);
  CHECK(std::string(json).find("holder_modulus") != std::string::npos);
  kr_string_free(json);
  CHECK(std::string(kr_version()).size() > 0);
  CHECK(kr_set_threads(0) == KR_INVALID_ARGUMENT);
  CHECK(kr_set_threads(1) == KR_OK);
}
