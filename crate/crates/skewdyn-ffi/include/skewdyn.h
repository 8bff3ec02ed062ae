#ifndef SKEWDYN_H
#define SKEWDYN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SkewdynStatus {
  SKEWDYN_STATUS_OK = 0,
  SKEWDYN_STATUS_IO = 1,
  SKEWDYN_STATUS_PRECONDITION = 2,
  SKEWDYN_STATUS_NUMERICAL = 3,
  SKEWDYN_STATUS_PARSE = 4,
  SKEWDYN_STATUS_NULL_POINTER = 5,
  SKEWDYN_STATUS_PANIC = 6,
} SkewdynStatus;

/**
 * Opaque skew product.
 */
typedef struct SkewdynMap SkewdynMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next call.
 */
const char *skewdyn_last_error(void);

/**
 * `F_a(z, w) = (z^2, w^2 + a z)`.
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_map_fa(double a_re, double a_im, struct SkewdynMap **out);

/**
 * Airplane-base family at superattracting period `n`.
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_map_airplane(size_t n, struct SkewdynMap **out);

/**
 * Map from its text form (`[p]` and `[q]` coefficient sections).
 *
 * # Safety
 * `text` must be a valid NUL-terminated string.
 */
enum SkewdynStatus skewdyn_map_from_text(const char *text, struct SkewdynMap **out);

/**
 * Releases a map. NULL is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void skewdyn_map_free(struct SkewdynMap *m);

/**
 * Degree of the map.
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_map_degree(const struct SkewdynMap *m, size_t *out);

/**
 * Image of `(z, w)`, written as `[re z', im z', re w', im w']`.
 *
 * # Safety
 * `out` must point to four writable doubles.
 */
enum SkewdynStatus skewdyn_map_eval(const struct SkewdynMap *m,
                                    double z_re,
                                    double z_im,
                                    double w_re,
                                    double w_im,
                                    double *out);

/**
 * Text form of the map (free with [`skewdyn_string_free`]).
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_map_to_text(const struct SkewdynMap *m, char **out);

/**
 * Axiom A certification report as JSON.
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_certify_json(const struct SkewdynMap *m,
                                        size_t base_samples,
                                        uint64_t seed,
                                        char **out_json);

/**
 * Accumulation-chain report as JSON.
 *
 * # Safety
 * Pointer arguments must be NULL or valid for the access described.
 */
enum SkewdynStatus skewdyn_chain_json(const struct SkewdynMap *m,
                                      size_t n_base,
                                      uint64_t seed,
                                      char **out_json);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void skewdyn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWDYN_H */
