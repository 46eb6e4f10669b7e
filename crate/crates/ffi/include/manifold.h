#ifndef MANIFOLD_H
#define MANIFOLD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_UTF8 = 2,
  MF_STATUS_IO = 3,
  MF_STATUS_PARSE = 4,
  MF_STATUS_VALIDATION = 5,
  MF_STATUS_TASK_MISMATCH = 6,
  MF_STATUS_OUT_OF_RANGE = 7,
  MF_STATUS_EMPTY_INPUT = 8,
  MF_STATUS_INVALID_ARGUMENT = 9,
  MF_STATUS_PANIC = 10,
} MfStatus;

typedef enum MfFilterMode {
  MF_FILTER_MODE_ALL = 0,
  MF_FILTER_MODE_UNION = 1,
  MF_FILTER_MODE_GT = 2,
} MfFilterMode;

/**
 * Opaque dataset handle.
 */
typedef struct MfDataset MfDataset;

typedef struct MfQuadrantCounts {
  size_t n_q1;
  size_t n_q2;
  size_t n_q3;
  size_t n_q4;
} MfQuadrantCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *mf_last_error_message(void);

/**
 * Load and validate a bundle manifest.
 *
 * # Safety
 * `manifest_path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MfStatus mf_dataset_load(const char *manifest_path, struct MfDataset **out);

/**
 * # Safety
 * `ds` must come from [`mf_dataset_load`] and not be used afterwards. Null is ignored.
 */
void mf_dataset_free(struct MfDataset *ds);

/**
 * Number of instances; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mf_dataset_len(const struct MfDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mf_dataset_num_models(const struct MfDataset *ds);

/**
 * 0 for regression datasets.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mf_dataset_num_classes(const struct MfDataset *ds);

/**
 * Quadrant counts of the classification cell (x, y, class) in confidence coordinates.
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
enum MfStatus mf_cell_quadrant_counts(const struct MfDataset *ds,
                                      size_t x_model,
                                      size_t y_model,
                                      size_t class_,
                                      enum MfFilterMode filter_mode,
                                      struct MfQuadrantCounts *out);

/**
 * Complementarity score of a set of counts, in [-1, 1].
 *
 * # Safety
 * `counts` must be readable and `out` writable.
 */
enum MfStatus mf_complementarity(const struct MfQuadrantCounts *counts, double *out);

/**
 * KL divergence in nats between two non-negative aggregate vectors of
 * length `len`, each smoothed with `alpha` and normalized.
 *
 * # Safety
 * `p` and `q` must point to `len` readable doubles and `out` be writable.
 */
enum MfStatus mf_kl_divergence(const double *p,
                               const double *q,
                               size_t len,
                               double alpha,
                               double *out);

/**
 * Points of a classification cell as the JSON array served by the API.
 * Release the string with [`mf_string_free`].
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
enum MfStatus mf_cell_points_json(const struct MfDataset *ds,
                                  size_t x_model,
                                  size_t y_model,
                                  size_t class_,
                                  enum MfFilterMode filter_mode,
                                  char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void mf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MANIFOLD_H */
