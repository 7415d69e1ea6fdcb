/*
 * C interface to the vacle library.
 *
 * Every call returns a vacle_status. On failure the message is available
 * from vacle_last_error() on the same thread until the next call. Objects
 * are opaque and released with their *_free function; strings returned
 * through char** are released with vacle_string_free.
 */
#ifndef VACLE_H
#define VACLE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(VACLE_BUILDING_LIBRARY)
#define VACLE_API __attribute__((visibility("default")))
#else
#define VACLE_API
#endif

typedef enum vacle_status {
  VACLE_OK = 0,
  VACLE_ERR_ARGUMENT = 1,  /* null pointer or out-of-range argument */
  VACLE_ERR_CONFIG = 2,    /* invalid parameters or configuration */
  VACLE_ERR_NUMERICAL = 3, /* a numerical procedure failed */
  VACLE_ERR_IO = 4,        /* unreadable or malformed input */
  VACLE_ERR_INTERNAL = 5
} vacle_status;

typedef enum vacle_family {
  VACLE_FAMILY_POPULATION = 0,
  VACLE_FAMILY_FISHER = 1,
  VACLE_FAMILY_AUTOCOV = 2
} vacle_family;

typedef enum vacle_method {
  VACLE_METHOD_VACLE = 0,
  VACLE_METHOD_TVACLE = 1,
  VACLE_METHOD_PY = 2,
  VACLE_METHOD_LWY = 3,
  VACLE_METHOD_WY = 4
} vacle_method;

VACLE_API const char* vacle_version(void);
VACLE_API const char* vacle_last_error(void);
VACLE_API void vacle_string_free(char* s);

/* ---- Random-matrix oracles -------------------------------------------- */

VACLE_API vacle_status vacle_mp_edges(double c, double sigma2, double* lower, double* upper);
VACLE_API vacle_status vacle_mp_quantile(double alpha, double c, double* out);
VACLE_API vacle_status vacle_pop_spike_map(double lambda, double c, double sigma2, double* out);
/* Spike threshold U and right support edge of the Fisher law. */
VACLE_API vacle_status vacle_fisher_limits(double c, double y, double sigma2, double* threshold,
                                           double* upper_edge);
VACLE_API vacle_status vacle_fisher_spike_map(double lambda, double c, double y, double sigma2,
                                              double* out);
VACLE_API vacle_status vacle_autocov_edge(double y, double sigma2, double* upper);
/* Limit of the sample eigenvalue of an AR(1) factor; *identifiable = 0 when
 * the factor does not separate from the bulk (then *value is the edge). */
VACLE_API vacle_status vacle_autocov_factor_limit(double theta, double innovation_var, double y,
                                                  double sigma2, double* value,
                                                  int* identifiable);
/* One JSON object with edges, thresholds and spike limits.
 * population: a = spikes (c used);  fisher: a = spikes (c, y used);
 * autocov: a = theta, b = innovation variances (y used; nb = na or 1). */
VACLE_API vacle_status vacle_limits_json(vacle_family family, double c, double y, double sigma2,
                                         const double* a, size_t na, const double* b, size_t nb,
                                         char** json);

/* ---- Spectra ------------------------------------------------------------ */

typedef struct vacle_spectrum vacle_spectrum;

/* T = 0 means no second dimension. scale_power is 1, or 2 for auto-covariance. */
VACLE_API vacle_status vacle_spectrum_create(const double* values, size_t count, size_t n, size_t T,
                                             int scale_power, vacle_spectrum** out);
/* column may be NULL for one value per line. */
VACLE_API vacle_status vacle_spectrum_ingest(const char* path, const char* column, size_t n,
                                             size_t T, int scale_power, vacle_spectrum** out);
VACLE_API size_t vacle_spectrum_size(const vacle_spectrum* s);
/* Copies min(size, capacity) values, descending. */
VACLE_API vacle_status vacle_spectrum_values(const vacle_spectrum* s, double* out, size_t capacity);
VACLE_API uint64_t vacle_spectrum_hash(const vacle_spectrum* s);
VACLE_API void vacle_spectrum_free(vacle_spectrum* s);

/* ---- Models and simulation ---------------------------------------------- */

typedef struct vacle_model vacle_model;

VACLE_API vacle_status vacle_model_population(const double* spikes, size_t q, double sigma2,
                                              size_t p, size_t n, vacle_model** out);
/* split_noise != 0 selects Sigma_2 = diag(1, ..., 1, 2, ..., 2). */
VACLE_API vacle_status vacle_model_fisher(const double* alpha, size_t q, int split_noise,
                                          double sigma2, size_t p, size_t n, size_t T,
                                          vacle_model** out);
VACLE_API vacle_status vacle_model_autocov(const double* theta, const double* gamma, size_t q,
                                           double sigma2, size_t p, size_t T, vacle_model** out);
VACLE_API vacle_status vacle_model_true_order(const vacle_model* m, size_t* out);
VACLE_API vacle_status vacle_simulate(const vacle_model* m, uint64_t seed, vacle_spectrum** out);
VACLE_API void vacle_model_free(vacle_model* m);

/* ---- Estimation --------------------------------------------------------- */

typedef struct vacle_estimate_options {
  vacle_method method;
  vacle_family family;    /* selects the bulk edge and the default tau */
  double tau;             /* 0: 0.8 for Fisher, else 0.5 */
  size_t L;               /* search bound */
  double ridge;           /* c_n, required by vacle and tvacle */
  double sigma2;          /* noise level when estimate_sigma2 == 0 */
  int estimate_sigma2;    /* population only: one-step M-P estimate */
  double k1, k2;          /* transform slopes */
  double kappa;           /* 0: log log p * p^(-2/3) */
  double py_C;            /* 0: tabulated value at c = p/n */
  int py_start;           /* first PY index, 0 or 1 */
  double lwy_dT;          /* required by lwy */
  double wy_dn;           /* 0: log log p * p^(-2/3) */
} vacle_estimate_options;

VACLE_API void vacle_estimate_options_default(vacle_estimate_options* opts);

typedef struct vacle_result vacle_result;

VACLE_API vacle_status vacle_estimate(const vacle_spectrum* s, const vacle_estimate_options* opts,
                                      vacle_result** out);
VACLE_API size_t vacle_result_q(const vacle_result* r);
VACLE_API int vacle_result_exhausted(const vacle_result* r);
VACLE_API double vacle_result_sigma2(const vacle_result* r);
/* VACLE_ERR_CONFIG when the method keeps no ratio trace. */
VACLE_API vacle_status vacle_result_trace_json(const vacle_result* r, char** json);
VACLE_API vacle_status vacle_result_plot_csv(const vacle_result* r, char** csv);
VACLE_API void vacle_result_free(vacle_result* r);

/* ---- Calibration -------------------------------------------------------- */

typedef struct vacle_calibration vacle_calibration;

/* cache_dir NULL: compute without touching disk; "" uses $VACLE_CACHE_DIR
 * or ./.vacle-cache. threads 0 uses every core. cache_hit may be NULL. */
VACLE_API vacle_status vacle_calibrate(vacle_family family, size_t p, size_t n, size_t T,
                                       size_t reps, uint64_t seed, const char* cache_dir,
                                       int force, size_t threads, vacle_calibration** out,
                                       int* cache_hit);
/* which: "c1", "c2", "c3a" or "c3b". */
VACLE_API vacle_status vacle_calibration_ridge(const vacle_calibration* c, const char* which,
                                               double* value, int* clamped);
VACLE_API double vacle_calibration_lwy_dT(const vacle_calibration* c);
VACLE_API vacle_status vacle_calibration_json(const vacle_calibration* c, char** json);
VACLE_API vacle_status vacle_calibration_cache_path(const vacle_calibration* c,
                                                    const char* cache_dir, char** path);
VACLE_API void vacle_calibration_free(vacle_calibration* c);

/* ---- Experiments -------------------------------------------------------- */

typedef struct vacle_experiment vacle_experiment;
typedef struct vacle_reports vacle_reports;

typedef struct vacle_report_summary {
  vacle_method method;
  size_t p, n, T;
  size_t reps;
  size_t true_q;
  double mean, mse, misest_rate;
  int partial;
} vacle_report_summary;

VACLE_API vacle_status vacle_experiment_load(const char* path, vacle_experiment** out);
VACLE_API vacle_status vacle_experiment_parse(const char* text, vacle_experiment** out);
/* key is "section.key"; overrides file values. */
VACLE_API vacle_status vacle_experiment_set(vacle_experiment* e, const char* key, const char* value);
VACLE_API vacle_status vacle_experiment_validate(const vacle_experiment* e);
/* Value of io.output ("" when unset) and io.trace. */
VACLE_API vacle_status vacle_experiment_output(const vacle_experiment* e, char** path, int* trace);
/* Returns VACLE_ERR_NUMERICAL with *out still set when a grid point stopped
 * early; the reports then carry the partial flag. */
VACLE_API vacle_status vacle_experiment_run(const vacle_experiment* e, vacle_reports** out);
VACLE_API void vacle_experiment_free(vacle_experiment* e);

VACLE_API vacle_status vacle_reports_load_json(const char* path, vacle_reports** out);
VACLE_API size_t vacle_reports_count(const vacle_reports* r);
VACLE_API vacle_status vacle_reports_get(const vacle_reports* r, size_t i,
                                         vacle_report_summary* out);
VACLE_API vacle_status vacle_reports_csv(const vacle_reports* r, char** csv);
VACLE_API vacle_status vacle_reports_json(const vacle_reports* r, char** json);
VACLE_API void vacle_reports_free(vacle_reports* r);

#ifdef __cplusplus
}
#endif

#endif /* VACLE_H */
