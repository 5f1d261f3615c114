#ifndef LEAP2TREND_H
#define LEAP2TREND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum L2tStatus {
  L2T_STATUS_OK = 0,
  L2T_STATUS_NULL_POINTER = 1,
  L2T_STATUS_INVALID_ARGUMENT = 2,
  L2T_STATUS_CONFIG = 3,
  L2T_STATUS_MISSING_STAGE = 4,
  L2T_STATUS_STALE_ARTIFACT = 5,
  L2T_STATUS_DATA = 6,
  L2T_STATUS_PANIC = 7,
} L2tStatus;

/**
 * A configured pipeline run. Opaque to C.
 */
typedef struct L2tRun L2tRun;

/**
 * Macro-averaged scores over the "emerging" and "not emerging" classes.
 */
typedef struct L2tMetrics {
  double precision_macro;
  double recall_macro;
  double f1_macro;
} L2tMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL after a success.
 * The pointer stays valid until the next library call on the same thread.
 */
const char *l2t_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be freed twice.
 */
void l2t_string_free(char *s);

/**
 * Loads and validates a TOML run configuration. Relative paths in the file
 * are resolved against its directory.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum L2tStatus l2t_run_open(const char *config_path, size_t threads, struct L2tRun **out);

/**
 * # Safety
 * `run` must come from [`l2t_run_open`] and must not be used afterwards. NULL is ignored.
 */
void l2t_run_free(struct L2tRun *run);

/**
 * Runs one stage by name (`ingest`, `keywords`, `embed`, `rank`, `detect`, `evaluate`).
 *
 * # Safety
 * `run` must be a live handle and `stage` a NUL-terminated string.
 */
enum L2tStatus l2t_run_stage(struct L2tRun *run, const char *stage);

/**
 * Runs every stage in order.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum L2tStatus l2t_run_all(struct L2tRun *run);

/**
 * The evaluation report of a completed run as JSON. Free with [`l2t_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum L2tStatus l2t_run_report_json(const struct L2tRun *run, char **out);

/**
 * Cosine similarity of two vectors of length `len`.
 *
 * # Safety
 * `u` and `v` must point to `len` readable doubles; `out` must be writable.
 */
enum L2tStatus l2t_cosine(const double *u, const double *v, size_t len, double *out);

/**
 * Least-squares slope of `ys` against x = 1..len. Needs `len >= 2`.
 *
 * # Safety
 * `ys` must point to `len` readable doubles; `out` must be writable.
 */
enum L2tStatus l2t_slope(const double *ys, size_t len, double *out);

/**
 * Area under the ROC curve. `has_score[i] == 0` marks an instance without a
 * score, which ranks below every scored one. Labels are nonzero for positives.
 *
 * # Safety
 * All three arrays must hold `len` readable elements; `out` must be writable.
 */
enum L2tStatus l2t_auc(const double *scores,
                       const uint8_t *has_score,
                       const uint8_t *labels,
                       size_t len,
                       double *out);

/**
 * Macro metrics from confusion counts.
 *
 * # Safety
 * `out` must be writable.
 */
enum L2tStatus l2t_macro_metrics(size_t tp,
                                 size_t fp,
                                 size_t tn,
                                 size_t fn_,
                                 struct L2tMetrics *out);

/**
 * Metrics of the baseline that flags every instance as emerging.
 *
 * # Safety
 * `out` must be writable.
 */
enum L2tStatus l2t_zero_rule(size_t positives, size_t negatives, struct L2tMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEAP2TREND_H */
