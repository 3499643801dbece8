/* C interface to the ustat library.
 *
 * Functions return USTAT_OK (0) or one of the status codes below. On failure
 * the message for the calling thread is available from ustat_last_error()
 * until the next failing call on that thread. Handles are opaque; release
 * them with the matching *_free function (passing NULL is allowed). Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with ustat_string_free().
 */
#ifndef USTAT_USTAT_H_
#define USTAT_USTAT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(USTAT_BUILDING_LIBRARY)
#define USTAT_API __attribute__((visibility("default")))
#else
#define USTAT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define USTAT_OK 0
#define USTAT_ERR_INVALID_ARGUMENT 1
#define USTAT_ERR_CONFIG 2
#define USTAT_ERR_NUMERICAL 3
#define USTAT_ERR_IO 4
#define USTAT_ERR_CONVERGENCE 5
#define USTAT_ERR_INTERNAL 99

typedef struct ustat_chain ustat_chain;
typedef struct ustat_density ustat_density;
typedef struct ustat_table ustat_table;

USTAT_API const char* ustat_version(void);
USTAT_API const char* ustat_last_error(void);
USTAT_API const char* ustat_status_name(int status);
USTAT_API void ustat_string_free(char* s);

/* Markov chains, described by a JSON object such as
 * {"type": "ar1", "theta": 0.8, "tau": 1}. */
USTAT_API int ustat_chain_from_json(const char* json, ustat_chain** out);
USTAT_API void ustat_chain_free(ustat_chain* chain);
USTAT_API int ustat_chain_state_dim(const ustat_chain* chain, size_t* dim);
/* Writes n * state_dim values, row-major, into out (capacity out_len). */
USTAT_API int ustat_chain_sample(const ustat_chain* chain, size_t n, uint64_t seed, double* out,
                                 size_t out_len);

/* Univariate densities, e.g. {"type": "gaussian", "mu": 0, "sigma2": 1}. */
USTAT_API int ustat_density_from_json(const char* json, ustat_density** out);
USTAT_API void ustat_density_free(ustat_density* density);
USTAT_API int ustat_density_pdf(const ustat_density* density, double x, double* out);
USTAT_API int ustat_density_cdf(const ustat_density* density, double x, double* out);
USTAT_API int ustat_density_sample(const ustat_density* density, size_t n, uint64_t seed, double* out);
USTAT_API int ustat_l2_distance(const ustat_density* f, const ustat_density* g, double* out);

/* l2 rearrangement distance between zero-padded sequences. */
USTAT_API int ustat_delta2(const double* x, size_t nx, const double* y, size_t ny, double* out);
/* Eigenvalues of the symmetric n x n row-major matrix m, ordered by
 * decreasing absolute value. */
USTAT_API int ustat_symmetric_eigenvalues(const double* m, size_t n, double* out);
/* Degree-k Funk-Hecke eigenvalue of psi(t) = sum_i coeffs[i] t^i on the unit
 * sphere of R^dim. */
USTAT_API int ustat_funk_hecke_eigenvalue(const double* coeffs, size_t ncoeffs, int dim, int k,
                                          double* out);
/* Projection-norm U-statistic for model (family, dim). */
USTAT_API int ustat_theta_hat(int family, uint64_t dim, const double* x, size_t n, double* out);

/* Calibration tables. The config object takes "f0", and optionally "seed",
 * "n", "alpha" and "calibration": {"reps", "u_grid_size", "models"}. */
USTAT_API int ustat_table_calibrate(const char* config_json, size_t workers, ustat_table** out);
USTAT_API int ustat_table_load(const char* path, ustat_table** out);
USTAT_API int ustat_table_save(const ustat_table* table, const char* path);
USTAT_API void ustat_table_free(ustat_table* table);
USTAT_API int ustat_table_u_alpha(const ustat_table* table, double* out);
USTAT_API int ustat_table_test(const ustat_table* table, const double* x, size_t n, double* t_alpha,
                               int* reject);

USTAT_API uint64_t ustat_derive_seed(uint64_t master, const char* phase, uint64_t index);

/* Experiment driver. command is one of "spectra", "gof-calibrate",
 * "gof-power", "online-run"; workers 0 means one per hardware thread.
 * summary_json may be NULL. */
USTAT_API int ustat_run(const char* command, const char* config_json, const char* out_dir, size_t workers,
                        char** summary_json);
USTAT_API int ustat_rerun(const char* manifest_json, const char* out_dir, size_t workers,
                          char** summary_json);
/* Sets key "a.b.c" of a JSON config to value (JSON text, or a bare string). */
USTAT_API int ustat_apply_override(const char* config_json, const char* assignment, char** out_json);

/* Oracle equivalence suites; *all_passed is 1 when every suite passed. */
USTAT_API int ustat_selftest(uint64_t seed, char** report, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* USTAT_USTAT_H_ */
