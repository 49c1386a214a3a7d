#ifndef CURVECLUST_H
#define CURVECLUST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_POINTER = 1,
  CC_STATUS_INVALID_ARGUMENT = 2,
  /*
   Bad curve, σ, covariance or a non-finite objective.
   */
  CC_STATUS_INVALID_MODEL = 3,
  CC_STATUS_TOO_FEW_POINTS = 4,
  CC_STATUS_DIMENSION_MISMATCH = 5,
  /*
   Malformed CSV or model file.
   */
  CC_STATUS_PARSE = 6,
  CC_STATUS_IO = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  CC_STATUS_INTERNAL = 8,
} CcStatus;

/*
 A point set with optional labels.
 */
typedef struct CcDataset CcDataset;

/*
 A fitted or loaded mixture (curve or Gaussian components).
 */
typedef struct CcModel CcModel;

/*
 MCEC settings; fill with [`cc_mcec_config_default`].
 */
typedef struct CcMcecConfig {
  size_t k;
  size_t order;
  size_t segments_k;
  /*
   Absolute stop threshold; NaN selects `1e-4 · |initial energy|`.
   */
  double eps;
  double removal_pct;
  uint64_t seed;
  size_t max_iters;
  /*
   0: k-means partition, 1: uniformly random labels.
   */
  uint32_t init;
} CcMcecConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *cc_last_error(void);

/*
 Static string describing the Fourier basis convention.
 */
const char *cc_trig_convention(void);

/*
 Copies `n × dim` row-major coordinates; `labels` may be null.

 # Safety
 `coords` must point to `n * dim` doubles, `labels` (if non-null) to `n`
 values, and `out` must be writable.
 */
enum CcStatus cc_dataset_new(const double *coords,
                             size_t n,
                             size_t dim,
                             const size_t *labels,
                             struct CcDataset **out);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum CcStatus cc_dataset_read_csv(const char *path, struct CcDataset **out);

/*
 Number of points, 0 for null.

 # Safety
 `ds` must be null or a live dataset handle.
 */
size_t cc_dataset_len(const struct CcDataset *ds);

/*
 Ambient dimension, 0 for null.

 # Safety
 `ds` must be null or a live dataset handle.
 */
size_t cc_dataset_dim(const struct CcDataset *ds);

/*
 # Safety
 `ds` must be null or a handle not yet freed.
 */
void cc_dataset_free(struct CcDataset *ds);

/*
 # Safety
 `out` must be writable.
 */
enum CcStatus cc_mcec_config_default(struct CcMcecConfig *out);

/*
 Runs MCEC once. `labels` (nullable) receives one cluster index per
 point; `energy` (nullable) the final energy.

 # Safety
 Handles must be live; `labels` must have room for `cc_dataset_len(ds)`
 values; `out` must be writable.
 */
enum CcStatus cc_mcec_run(const struct CcDataset *ds,
                          const struct CcMcecConfig *config,
                          struct CcModel **out,
                          size_t *labels,
                          double *energy);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum CcStatus cc_model_load(const char *path, struct CcModel **out);

/*
 # Safety
 `model` must be live and `path` NUL-terminated.
 */
enum CcStatus cc_model_save(const struct CcModel *model, const char *path);

/*
 Ambient dimension, 0 for null.

 # Safety
 `model` must be null or live.
 */
size_t cc_model_dim(const struct CcModel *model);

/*
 Mixture log-density at one point of length `dim`.

 # Safety
 `x` must hold `dim` doubles and `out` be writable.
 */
enum CcStatus cc_model_log_density(const struct CcModel *model,
                                   const double *x,
                                   size_t dim,
                                   double *out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void cc_model_free(struct CcModel *model);

/*
 # Safety
 `a` and `b` must hold `n` values; `out` writable.
 */
enum CcStatus cc_rand_index(const size_t *a, const size_t *b, size_t n, double *out);

/*
 # Safety
 `a` and `b` must hold `n` values; `out` writable.
 */
enum CcStatus cc_jaccard_index(const size_t *a, const size_t *b, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURVECLUST_H */
