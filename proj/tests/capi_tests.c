/* Exercises the C interface from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ustat/ustat.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

#define EXPECT_OK(call)                                                                   \
  do {                                                                                    \
    int status_ = (call);                                                                 \
    if (status_ != USTAT_OK) {                                                            \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call,                 \
              ustat_status_name(status_), ustat_last_error());                            \
      ++failures;                                                                         \
    }                                                                                     \
  } while (0)

static void test_chain(void) {
  ustat_chain* chain = NULL;
  size_t dim = 0;
  double a[100], b[100];
  EXPECT_OK(ustat_chain_from_json("{\"type\": \"ar1\", \"theta\": 0.8, \"tau\": 1}", &chain));
  EXPECT_OK(ustat_chain_state_dim(chain, &dim));
  EXPECT(dim == 1);
  EXPECT_OK(ustat_chain_sample(chain, 100, 42, a, 100));
  EXPECT_OK(ustat_chain_sample(chain, 100, 42, b, 100));
  EXPECT(memcmp(a, b, sizeof a) == 0);
  EXPECT(a[0] == 0.0);
  EXPECT(ustat_chain_sample(chain, 100, 42, a, 50) == USTAT_ERR_INVALID_ARGUMENT);
  ustat_chain_free(chain);

  chain = NULL;
  EXPECT(ustat_chain_from_json("{\"type\": \"ar1\", \"theta\": 1.5}", &chain) != USTAT_OK);
  EXPECT(chain == NULL);
  EXPECT(strlen(ustat_last_error()) > 0);
  EXPECT(ustat_chain_from_json("{not json", &chain) == USTAT_ERR_CONFIG);

  EXPECT_OK(ustat_chain_from_json(
      "{\"type\": \"sphere_walk\", \"dim\": 3, \"radial\": {\"name\": \"uniform\"}}", &chain));
  EXPECT_OK(ustat_chain_state_dim(chain, &dim));
  EXPECT(dim == 3);
  EXPECT_OK(ustat_chain_sample(chain, 10, 1, a, 30));
  EXPECT(fabs(a[27] * a[27] + a[28] * a[28] + a[29] * a[29] - 1.0) < 1e-9);
  ustat_chain_free(chain);
  ustat_chain_free(NULL);
}

static void test_density(void) {
  ustat_density* f = NULL;
  ustat_density* g = NULL;
  double v = 0.0;
  double xs[1000];
  EXPECT_OK(ustat_density_from_json("{\"type\": \"gaussian\", \"mu\": 0, \"sigma2\": 1}", &f));
  EXPECT_OK(ustat_density_pdf(f, 0.0, &v));
  EXPECT(fabs(v - 0.3989422804014327) < 1e-15);
  EXPECT_OK(ustat_density_cdf(f, 0.0, &v));
  EXPECT(fabs(v - 0.5) < 1e-15);
  EXPECT_OK(ustat_density_sample(f, 1000, 3, xs));
  EXPECT_OK(ustat_l2_distance(f, f, &v));
  EXPECT(v < 1e-8);
  EXPECT_OK(ustat_density_from_json("{\"type\": \"gaussian\", \"mu\": 0, \"sigma2\": 1.2}", &g));
  EXPECT_OK(ustat_l2_distance(f, g, &v));
  EXPECT(v > 0.0 && v < 0.2);
  EXPECT(ustat_density_pdf(NULL, 0.0, &v) == USTAT_ERR_INVALID_ARGUMENT);
  ustat_density_free(f);
  ustat_density_free(g);
}

static void test_spectral(void) {
  const double x[] = {3.0, -1.0};
  const double y[] = {2.0};
  const double m[] = {2.0, 1.0, 1.0, 2.0};
  const double coeffs[] = {1.0, 2.0, 1.0};
  double v = 0.0;
  double ev[2];
  EXPECT_OK(ustat_delta2(x, 2, y, 1, &v));
  EXPECT(fabs(v - sqrt(2.0)) < 1e-14);
  EXPECT_OK(ustat_symmetric_eigenvalues(m, 2, ev));
  EXPECT(fabs(ev[0] - 3.0) < 1e-12 && fabs(ev[1] - 1.0) < 1e-12);
  EXPECT_OK(ustat_funk_hecke_eigenvalue(coeffs, 3, 2, 0, &v));
  EXPECT(fabs(v - 3.0 * acos(-1.0)) < 1e-8);
}

static void test_gof(void) {
  const double s[] = {0.1, 0.2, 0.6};
  double v = 0.0;
  double u = 0.0;
  double xs[40];
  double t_alpha = 0.0;
  int reject = -1;
  ustat_table* table = NULL;
  ustat_table* loaded = NULL;
  ustat_density* f = NULL;
  const char* path = "capi_test_table.txt";

  EXPECT_OK(ustat_theta_hat(1, 2, s, 3, &v));
  EXPECT(fabs(v - 2.0 / 3.0) < 1e-14);
  EXPECT(ustat_theta_hat(1, 2, s, 1, &v) == USTAT_ERR_INVALID_ARGUMENT);

  EXPECT_OK(ustat_table_calibrate(
      "{\"seed\": 2, \"n\": 40, \"f0\": {\"type\": \"gaussian\", \"mu\": 0, \"sigma2\": 1},"
      " \"calibration\": {\"reps\": 300, \"u_grid_size\": 10}}",
      1, &table));
  EXPECT_OK(ustat_table_u_alpha(table, &u));
  EXPECT(u > 0.0 && u <= 0.05);
  EXPECT_OK(ustat_table_save(table, path));
  EXPECT_OK(ustat_table_load(path, &loaded));
  EXPECT_OK(ustat_density_from_json("{\"type\": \"gaussian\", \"mu\": 3, \"sigma2\": 1}", &f));
  EXPECT_OK(ustat_density_sample(f, 40, 9, xs));
  EXPECT_OK(ustat_table_test(loaded, xs, 40, &t_alpha, &reject));
  EXPECT(reject == 1 && t_alpha > 0.0);
  EXPECT(ustat_table_test(loaded, xs, 39, &t_alpha, &reject) == USTAT_ERR_INVALID_ARGUMENT);
  EXPECT(ustat_table_load("/nonexistent/table.txt", &loaded) == USTAT_ERR_IO);
  remove(path);
  ustat_density_free(f);
  ustat_table_free(table);
  ustat_table_free(loaded);
}

static void test_driver(void) {
  char* out = NULL;
  char* report = NULL;
  int passed = 0;
  EXPECT(ustat_derive_seed(1, "x", 2) == ustat_derive_seed(1, "x", 2));
  EXPECT(ustat_derive_seed(1, "x", 2) != ustat_derive_seed(1, "x", 3));
  EXPECT_OK(ustat_apply_override("{\"a\": {\"b\": 1}}", "a.b=2", &out));
  EXPECT(out != NULL && strcmp(out, "{\"a\":{\"b\":2}}") == 0);
  ustat_string_free(out);
  EXPECT(ustat_run("bogus", "{}", ".", 1, NULL) == USTAT_ERR_CONFIG);
  EXPECT(ustat_run("gof-calibrate", "{\"f0\": {\"type\": \"gaussian\", \"mu\": 0, \"sigma2\": 1},"
                   " \"calibration\": {\"models\": []}}",
                   ".", 1, NULL) == USTAT_ERR_CONFIG);
  EXPECT_OK(ustat_selftest(1, &report, &passed));
  EXPECT(passed == 1);
  EXPECT(report != NULL && strstr(report, "PASS") != NULL);
  ustat_string_free(report);
  EXPECT(strcmp(ustat_status_name(USTAT_ERR_IO), "i/o error") == 0);
  EXPECT(strlen(ustat_version()) > 0);
}

int main(void) {
  test_chain();
  test_density();
  test_spectral();
  test_gof();
  test_driver();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("capi_tests: all checks passed\n");
  return 0;
}
