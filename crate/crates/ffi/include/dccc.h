#ifndef DCCC_H
#define DCCC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum DcccStatus {
  DCCC_STATUS_OK = 0,
  DCCC_STATUS_NULL_POINTER = 1,
  DCCC_STATUS_INVALID_ARGUMENT = 2,
  DCCC_STATUS_CONFIG = 3,
  DCCC_STATUS_PARSE = 4,
  DCCC_STATUS_IO = 5,
  DCCC_STATUS_NUMERICAL = 6,
  DCCC_STATUS_DEGENERATE = 7,
  DCCC_STATUS_CONTRACT = 8,
  DCCC_STATUS_BUFFER_TOO_SMALL = 9,
  DCCC_STATUS_PANIC = 10,
} DcccStatus;

/**
 * Experiment configuration.
 */
typedef struct DcccConfig DcccConfig;

/**
 * A finished training run.
 */
typedef struct DcccRun DcccRun;

/**
 * One epoch's metrics; absent values are NaN.
 */
typedef struct DcccEpochReport {
  size_t epoch;
  double eps;
  size_t clusters;
  size_t outliers;
  double loss;
  double nmi;
  double ari;
  double intra;
  double inter;
  double map;
  double r1;
  double r5;
  double r10;
} DcccEpochReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *dccc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dccc_version(void);

/**
 * New config holding the defaults.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DcccStatus dccc_config_default(struct DcccConfig **out);

/**
 * Parses a `key = value` config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcccStatus dccc_config_from_file(const char *path, struct DcccConfig **out);

/**
 * Sets one key. The config is left unchanged when the result is invalid.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum DcccStatus dccc_config_set(struct DcccConfig *cfg, const char *key, const char *value);

/**
 * Writes the value of `key` as a NUL-terminated string into `buf`.
 * `needed` (optional) receives the required size including the NUL.
 *
 * # Safety
 * `cfg` must come from this library, `key` must be NUL-terminated and
 * `buf` must hold `len` bytes (it may be NULL when `len` is 0).
 */
enum DcccStatus dccc_config_get(const struct DcccConfig *cfg,
                                const char *key,
                                char *buf,
                                size_t len,
                                size_t *needed);

/**
 * DBSCAN radius the config's schedule uses at `epoch` (from 0).
 *
 * # Safety
 * `cfg` must come from this library and `out` must be valid.
 */
enum DcccStatus dccc_config_eps_at(const struct DcccConfig *cfg, size_t epoch, double *out);

/**
 * # Safety
 * `cfg` must come from this library or be NULL; it is invalid afterwards.
 */
void dccc_config_free(struct DcccConfig *cfg);

/**
 * Runs a full training in memory.
 *
 * # Safety
 * `cfg` must come from this library and `out` must be valid.
 */
enum DcccStatus dccc_train(const struct DcccConfig *cfg, struct DcccRun **out);

/**
 * Trains and writes `reports.csv` and `checkpoint.json` into `dir`.
 *
 * # Safety
 * `cfg` must come from this library, `dir` must be NUL-terminated and
 * `out` must be valid.
 */
enum DcccStatus dccc_train_to_dir(const struct DcccConfig *cfg,
                                  const char *dir,
                                  struct DcccRun **out);

/**
 * Number of epoch reports in a run.
 *
 * # Safety
 * `run` must come from this library or be NULL (gives 0).
 */
size_t dccc_run_num_epochs(const struct DcccRun *run);

/**
 * # Safety
 * `run` must come from this library and `out` must be valid.
 */
enum DcccStatus dccc_run_report(const struct DcccRun *run,
                                size_t epoch,
                                struct DcccEpochReport *out);

/**
 * Copies the reports CSV into `buf` like [`dccc_config_get`].
 *
 * # Safety
 * `run` must come from this library and `buf` must hold `len` bytes.
 */
enum DcccStatus dccc_run_reports_csv(const struct DcccRun *run,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

/**
 * # Safety
 * `run` must come from this library or be NULL; it is invalid afterwards.
 */
void dccc_run_free(struct DcccRun *run);

/**
 * Clusters `n` row-major feature vectors of length `dim` with kNN-set
 * Jaccard distances and DBSCAN. Rows are L2-normalized first.
 * `labels` receives `n` cluster ids, -1 for outliers.
 *
 * # Safety
 * `features` must hold `n * dim` doubles and `labels` `n` slots;
 * `num_clusters` may be NULL.
 */
enum DcccStatus dccc_cluster_features(const double *features,
                                      size_t n,
                                      size_t dim,
                                      size_t k,
                                      double eps,
                                      size_t min_samples,
                                      int64_t *labels,
                                      size_t *num_clusters);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCCC_H */
