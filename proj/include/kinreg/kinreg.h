#ifndef KINREG_KINREG_H
#define KINREG_KINREG_H

#include <stddef.h>
#include <stdint.h>

#if defined(KINREG_BUILDING)
#define KR_API __attribute__((visibility("default")))
#else
#define KR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kr_status {
  KR_OK = 0,
  KR_INVALID_ARGUMENT = 1,
  KR_DOMAIN = 2,
  KR_SINGULARITY = 3,
  KR_NO_TRAJECTORY = 4,
  KR_CONFIG = 5,
  KR_IO = 6,
  KR_INTERNAL = 7
} kr_status;

typedef enum kr_mode { KR_MODE_SOLVE = 0, KR_MODE_VERIFY = 1 } kr_mode;

typedef struct kr_kernel kr_kernel;
typedef struct kr_domain kr_domain;
typedef struct kr_scenario kr_scenario;

/* Message of the last failed call on this thread; empty when none. */
KR_API const char* kr_last_error(void);
/* For KR_CONFIG failures: the offending config key. */
KR_API const char* kr_last_error_key(void);
KR_API const char* kr_version(void);
KR_API void kr_string_free(char* s);
KR_API kr_status kr_set_threads(int threads);

/* Cross section B(theta) |V|^gamma with cutoff parameters delta, beta0 and
   linear-term constants c1, c2. */
KR_API kr_status kr_kernel_create(double gamma, double delta, double beta0, double c1, double c2, kr_kernel** out);
KR_API void kr_kernel_destroy(kr_kernel* k);
KR_API kr_status kr_kernel_frequency(const kr_kernel* k, double speed, double* nu);
/* k(zeta, z); KR_SINGULARITY at zeta == z. */
KR_API kr_status kr_kernel_value(const kr_kernel* k, const double zeta[3], const double z[3], double* value);
/* nu0, nu1 with nu0 (1+s)^gamma <= nu(s) <= nu1 (1+s)^gamma. */
KR_API kr_status kr_kernel_bounds(const kr_kernel* k, double* nu0, double* nu1);

KR_API kr_status kr_domain_ball(const double center[3], double radius, kr_domain** out);
KR_API kr_status kr_domain_ellipsoid(const double center[3], const double semi_axes[3], kr_domain** out);
KR_API void kr_domain_destroy(kr_domain* d);
/* Backward exit time tau(x, zeta) and exit point p(x, zeta). */
KR_API kr_status kr_domain_exit(const kr_domain* d, const double x[3], const double zeta[3], double* tau, double point[3]);

KR_API kr_status kr_scenario_load(const char* path, kr_scenario** out);
KR_API kr_status kr_scenario_parse(const char* json, kr_scenario** out);
KR_API void kr_scenario_destroy(kr_scenario* s);
KR_API kr_status kr_scenario_set_seed(kr_scenario* s, uint64_t seed);
KR_API kr_status kr_scenario_set_output(kr_scenario* s, const char* dir);
/* Runs the scenario, writing results under out_dir (the scenario's own output
   directory when NULL). `summary_json` is optional; free it with kr_string_free. */
KR_API kr_status kr_run(const kr_scenario* s, kr_mode mode, const char* out_dir, int* passed, char** summary_json);

/* JSON array of {name, statement, needs_field}. Free with kr_string_free. */
KR_API kr_status kr_list_checks(char** json);

#ifdef __cplusplus
}
#endif

#endif
