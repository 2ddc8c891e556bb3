#ifndef GAITRISK_H
#define GAITRISK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum GrStatus {
  GR_STATUS_OK = 0,
  GR_STATUS_NULL_POINTER = 1,
  GR_STATUS_INVALID_ARGUMENT = 2,
  GR_STATUS_IO = 3,
  GR_STATUS_FORMAT = 4,
  GR_STATUS_SHAPE = 5,
  GR_STATUS_CHECKPOINT_MISMATCH = 6,
  GR_STATUS_NON_FINITE = 7,
  GR_STATUS_PANIC = 8,
  GR_STATUS_OTHER = 9,
} GrStatus;

/**
 * Subject group from questionnaire scores.
 */
typedef enum GrGroup {
  GR_GROUP_EXPERIMENTAL = 0,
  GR_GROUP_CONTROL = 1,
  GR_GROUP_EXCLUDED = 2,
} GrGroup;

/**
 * A loaded model. Immutable after loading; may be shared across threads for scoring.
 */
typedef struct GrModel GrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread ("" if none). Owned by the
 * library; valid until the next failing call on the same thread.
 */
const char *gr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gr_version(void);

/**
 * Loads a checkpoint file. On success `*out` owns a model to release with [`gr_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GrStatus gr_model_load(const char *path, struct GrModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`gr_model_load`] and not have been freed.
 */
void gr_model_free(struct GrModel *model);

/**
 * Clip length, frame height and frame width the model expects.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum GrStatus gr_model_geometry(const struct GrModel *model,
                                size_t *clip_len,
                                size_t *height,
                                size_t *width);

/**
 * Risk probability of the sequence stored in a `.gseq` file.
 *
 * # Safety
 * `model` must be a live handle, `path` NUL-terminated, `out_prob` writable.
 */
enum GrStatus gr_predict_file(const struct GrModel *model, const char *path, double *out_prob);

/**
 * Risk probability of `frames` binary frames of `height × width` bytes each
 * (frame-major, row-major; every byte 0 or 1).
 *
 * # Safety
 * `pixels` must point to `frames * height * width` readable bytes.
 */
enum GrStatus gr_predict_frames(const struct GrModel *model,
                                const uint8_t *pixels,
                                size_t frames,
                                size_t height,
                                size_t width,
                                double *out_prob);

/**
 * Group of a subject from SDS (20–80) and PHQ-9 (0–27) scores.
 *
 * # Safety
 * `out_group` must be writable.
 */
enum GrStatus gr_assign_group(uint32_t sds, uint32_t phq9, enum GrGroup *out_group);

/**
 * ROC AUC of `n` scores; `is_risk[i]` nonzero marks a positive.
 *
 * # Safety
 * `scores` and `is_risk` must each point to `n` readable elements.
 */
enum GrStatus gr_auc(const double *scores, const uint8_t *is_risk, size_t n, double *out_auc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAITRISK_H */
