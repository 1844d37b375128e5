#ifndef LINKORACLE_H
#define LINKORACLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
enum LoStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  LO_STATUS_OK = 0,
  LO_STATUS_NULL_POINTER = 1,
  LO_STATUS_INVALID_UTF8 = 2,
  LO_STATUS_PARSE = 3,
  /**
   * Checkpoint made for a different model layout or vocabulary.
   */
  LO_STATUS_MISMATCH = 4,
  LO_STATUS_IO = 5,
  LO_STATUS_INTERNAL = 6,
  LO_STATUS_PANIC = 7,
};
#ifndef __cplusplus
typedef int32_t LoStatus;
#endif // __cplusplus

/**
 * Matcher verdicts.
 */
enum LoTri
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  LO_TRI_ZERO = 0,
  LO_TRI_ONE = 1,
  LO_TRI_TOP = 2,
};
#ifndef __cplusplus
typedef int32_t LoTri;
#endif // __cplusplus

/**
 * A trained model loaded from a checkpoint.
 */
typedef struct LoModel LoModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lo_version(void);

/**
 * Message of the last failed call on this thread, or null. The caller owns the
 * returned string and releases it with [`lo_string_free`].
 */
char *lo_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library and not yet freed.
 */
void lo_string_free(char *s);

/**
 * Loads a checkpoint file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_model` a valid pointer.
 */
LoStatus lo_model_load(const char *path, struct LoModel **out_model);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle from [`lo_model_load`] not yet freed.
 */
void lo_model_free(struct LoModel *m);

/**
 * Number of trainable scalars, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
uint64_t lo_model_param_count(const struct LoModel *m);

/**
 * Link probability predicted by the model.
 *
 * # Safety
 * String arguments must be NUL-terminated; `m` a live handle; `out_p` valid.
 */
LoStatus lo_model_forward(const struct LoModel *m,
                          const char *intent_json,
                          const char *filter_json,
                          double *out_p);

/**
 * Exact 0 or 1 when the matcher decides the link, the model probability
 * otherwise.
 *
 * # Safety
 * As for [`lo_model_forward`].
 */
LoStatus lo_model_qmatch(const struct LoModel *m,
                         const char *intent_json,
                         const char *filter_json,
                         double *out_p);

/**
 * Tri-valued matcher verdict for an intent and a filter.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_tri` valid.
 */
LoStatus lo_abstract_match(const char *intent_json, const char *filter_json, LoTri *out_tri);

/**
 * Whether two patterns share a concretization; writes 1 or 0.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_flag` valid.
 */
LoStatus lo_pattern_overlap(const char *left, const char *right, int32_t *out_flag);

/**
 * Whether the pattern admits the plain string; writes 1 or 0.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_flag` valid.
 */
LoStatus lo_pattern_contains(const char *pattern_text, const char *s, int32_t *out_flag);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINKORACLE_H */
