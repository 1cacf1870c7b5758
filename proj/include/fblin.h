/* C interface to the feedback-linearisation toolkit.
 *
 * All functions return fbl_status; on any failure fbl_last_error() carries
 * a message describing the problem. Handles are opaque and must be released
 * with their matching free function. The library is thread-compatible:
 * distinct handles may be used from distinct threads concurrently.
 */
#ifndef FBLIN_H
#define FBLIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fbl_status {
  FBL_OK = 0,
  FBL_ERR_INVALID = 1,      /* bad arguments, config, or document */
  FBL_ERR_DIVERGED = 2,     /* simulation or filter blew up */
  FBL_ERR_CHECK_FAILED = 3, /* scenario ran but an embedded check failed */
  FBL_ERR_IO = 4            /* file could not be read or written */
} fbl_status;

/* Message for the most recent failure on this thread. Never NULL; empty
 * string when no failure has occurred. Valid until the next fbl_ call on
 * the same thread. */
const char* fbl_last_error(void);

const char* fbl_version(void);

/* ---- model documents -------------------------------------------------- */

typedef struct fbl_model fbl_model;

fbl_status fbl_model_load(const char* path, fbl_model** out);
fbl_status fbl_model_save(const fbl_model* model, const char* path);
void fbl_model_free(fbl_model* model);

/* State dimension, number of polynomial terms, sample time in seconds.
 * Return 0 / 0 / 0.0 for a NULL handle. */
int fbl_model_order(const fbl_model* model);
int fbl_model_num_terms(const fbl_model* model);
double fbl_model_sample_time(const fbl_model* model);

/* Simulates the model from the zero state. y_out must hold len doubles. */
fbl_status fbl_model_simulate(const fbl_model* model, const double* u, size_t len,
                              double* y_out);

/* Copy of the model with the quadratic output-polynomial column zeroed.
 * Fails with FBL_ERR_INVALID when the model has no quadratic term. */
fbl_status fbl_model_zero_quadratic(const fbl_model* model, fbl_model** out);

/* ---- experiment pipelines --------------------------------------------- */

typedef struct fbl_run_options {
  uint64_t seed;      /* master seed override, honoured when has_seed != 0 */
  int has_seed;
  int full_scale;     /* non-zero: full realisation/period counts */
  int check;          /* non-zero: failing scenario checks fail the call */
  unsigned threads;   /* realisation fan-out; 0 = hardware default */
} fbl_run_options;

/* Number of built-in scenarios and the id of the i-th one (NULL when out
 * of range). Ids double as config `scenario` values. */
size_t fbl_scenario_count(void);
const char* fbl_scenario_name(size_t index);

/* Writes the default config document for a scenario id. */
fbl_status fbl_write_default_config(const char* scenario, const char* path);

/* Runs a scenario end to end, writing records, reports and summary.json
 * under out_dir. Exactly one of scenario/config_path may be NULL: a NULL
 * config uses the scenario defaults, a NULL scenario takes the id from the
 * config document. out_dir NULL uses the config's out_dir. opts may be
 * NULL. all_passed_out (optional) receives 1 when every embedded check
 * passed, else 0. */
fbl_status fbl_run_scenario(const char* scenario, const char* config_path,
                            const char* out_dir, const fbl_run_options* opts,
                            int* all_passed_out);

/* Single pipeline stages. Config resolution matches fbl_run_scenario. */
fbl_status fbl_excite(const char* scenario, const char* config_path, const char* out_dir,
                      const fbl_run_options* opts);
fbl_status fbl_simulate(const char* scenario, const char* config_path, const char* out_dir,
                        const fbl_run_options* opts);
fbl_status fbl_linearise(const char* scenario, const char* config_path, const char* out_dir,
                         const fbl_run_options* opts);

/* Spectral/distortion analysis of recorded outputs. design_path names an
 * excitation design document; record_paths are CSV logs (open-loop or
 * decimated closed-loop). resonance_hint_hz may be NaN to auto-detect. */
fbl_status fbl_analyse(const char* design_path, const char* const* record_paths,
                       size_t record_count, size_t discard_periods,
                       double resonance_hint_hz, const char* out_dir);

/* Per-line delta between two distortion reports on the same grid. */
fbl_status fbl_compare(const char* before_report_path, const char* after_report_path,
                       const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* FBLIN_H */
