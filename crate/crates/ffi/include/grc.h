#ifndef GRC_H
#define GRC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Reply buffer size offered to the generator callback.
 */
#define GRC_MAX_REPLY_BYTES 4096

typedef enum GrcReason {
  GRC_REASON_ACCEPTED = 0,
  GRC_REASON_INSUFFICIENT_EVIDENCE = 1,
  GRC_REASON_NO_UNIQUE_MODE = 2,
  GRC_REASON_LOW_CONSENSUS = 3,
  GRC_REASON_HIGH_DISPERSION = 4,
  GRC_REASON_LOW_CONFIDENCE = 5,
} GrcReason;

typedef enum GrcStatus {
  GRC_STATUS_OK = 0,
  GRC_STATUS_NULL_POINTER = 1,
  GRC_STATUS_INVALID_UTF8 = 2,
  GRC_STATUS_INVALID_ARGUMENT = 3,
  GRC_STATUS_INVALID_CONFIG = 4,
  /**
   * The crop has no foreground, so no length bound exists.
   */
  GRC_STATUS_NO_FOREGROUND = 5,
  /**
   * A conditional metric over an empty set.
   */
  GRC_STATUS_UNDEFINED = 6,
  GRC_STATUS_UNKNOWN_OPERATING_POINT = 7,
  GRC_STATUS_PANIC = 8,
} GrcStatus;

/**
 * Opaque controller: view protocol, screening parameters, and
 * operating-point family.
 */
typedef struct GrcController GrcController;

/**
 * Length-bound parameters; pass NULL anywhere one is accepted for defaults.
 */
typedef struct GrcLengthBoundParams {
  double alpha;
  uint32_t min_bound;
  double aspect_per_char;
} GrcLengthBoundParams;

/**
 * An accept/abstain decision. `transcript` is NULL on abstention;
 * `vote_fraction` and `dispersion` are NaN when there is no unique mode.
 */
typedef struct GrcDecision {
  bool accepted;
  enum GrcReason reason;
  char *transcript;
  uint32_t n_valid;
  double vote_fraction;
  double dispersion;
} GrcDecision;

/**
 * Writes one view's transcription into `out_text` (capacity `out_cap`,
 * no terminator needed) and its byte length into `out_len`. Returns 0 on
 * success; any other value marks the view as failed. A length above
 * `out_cap` is treated as a failure. `channels` is 1 (gray) or 3 (RGB).
 */
typedef int32_t (*GrcGenerateFn)(void *user_data,
                                 const uint8_t *pixels,
                                 uint32_t width,
                                 uint32_t height,
                                 uint32_t channels,
                                 const char *prompt,
                                 uint32_t view_index,
                                 char *out_text,
                                 size_t out_cap,
                                 size_t *out_len);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread. Valid until the next
 * library call on the same thread; never NULL.
 */
const char *grc_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void grc_string_free(char *s);

/**
 * Levenshtein distance over Unicode scalar values.
 *
 * # Safety
 * `a` and `b` must be valid C strings; `out` must be writable.
 */
enum GrcStatus grc_edit_distance(const char *a, const char *b, size_t *out);

/**
 * `min(1, ED(a, b) / max(1, |a|, |b|))`.
 *
 * # Safety
 * `a` and `b` must be valid C strings; `out` must be writable.
 */
enum GrcStatus grc_bounded_distance(const char *a, const char *b, double *out);

/**
 * Canonical form of `raw`. Free the result with `grc_string_free`.
 *
 * # Safety
 * `raw` must be a valid C string; `out` must be writable.
 */
enum GrcStatus grc_canonicalize(const char *raw, bool case_insensitive, char **out);

/**
 * Character error rate of `prediction` against `ground_truth`, both
 * canonicalized first. Fails if the ground truth canonicalizes to empty.
 *
 * # Safety
 * Both strings must be valid C strings; `out` must be writable.
 */
enum GrcStatus grc_cer(const char *prediction,
                       const char *ground_truth,
                       bool case_insensitive,
                       double *out);

/**
 * Fraction of `cers` at or above `delta`. `GRC_STATUS_UNDEFINED` for n = 0.
 *
 * # Safety
 * `cers` must point to `n` doubles; `out` must be writable.
 */
enum GrcStatus grc_meltdown_rate(const double *cers, size_t n, double delta, double *out);

/**
 * Nearest-rank 99th percentile. `GRC_STATUS_UNDEFINED` for n = 0.
 *
 * # Safety
 * `values` must point to `n` doubles; `out` must be writable.
 */
enum GrcStatus grc_percentile_p99(const double *values, size_t n, double *out);

/**
 * Geometric length bound of a row-major 8-bit crop (`channels` 1 or 3).
 * `params` may be NULL for defaults.
 *
 * # Safety
 * `pixels` must point to `width * height * channels` bytes; `out` must be writable.
 */
enum GrcStatus grc_length_bound(const uint8_t *pixels,
                                uint32_t width,
                                uint32_t height,
                                uint32_t channels,
                                const struct GrcLengthBoundParams *params,
                                uint32_t *out);

/**
 * Controller with the default protocol, screening, and operating points.
 */
struct GrcController *grc_controller_new_default(void);

/**
 * Controller from TOML with optional `[protocol]`, `[length_bound]`, and
 * `[[operating_points]]` tables, as in the run config.
 *
 * # Safety
 * `toml_text` must be a valid C string; `out` must be writable.
 */
enum GrcStatus grc_controller_from_toml(const char *toml_text, struct GrcController **out);

/**
 * Releases a controller. NULL is ignored.
 *
 * # Safety
 * `ctrl` must come from this library and not have been freed.
 */
void grc_controller_free(struct GrcController *ctrl);

/**
 * Number of views the controller queries per crop.
 *
 * # Safety
 * `ctrl` must be a live controller.
 */
uint32_t grc_controller_k_views(const struct GrcController *ctrl);

/**
 * Decides from already-collected view outputs. Each text is canonicalized
 * under the controller's case rule; only entries with `valid[i]` count.
 *
 * # Safety
 * `texts` and `valid` must each hold `n` entries; `ctrl` and `out` must be valid.
 */
enum GrcStatus grc_controller_decide(const struct GrcController *ctrl,
                                     uint32_t m,
                                     const char *const *texts,
                                     const bool *valid,
                                     size_t n,
                                     struct GrcDecision *out);

/**
 * Runs the full controller on one crop, querying `generate` once per view
 * (serially, possibly from a worker thread). `source_id` keys the
 * view-protocol randomness. A failed callback marks that view absent.
 *
 * # Safety
 * `pixels` must point to `width * height * channels` bytes; `generate`
 * must be safe to call with `user_data`; `ctrl`, `source_id`, and `out`
 * must be valid.
 */
enum GrcStatus grc_controller_run(const struct GrcController *ctrl,
                                  uint32_t m,
                                  const uint8_t *pixels,
                                  uint32_t width,
                                  uint32_t height,
                                  uint32_t channels,
                                  const char *source_id,
                                  GrcGenerateFn generate,
                                  void *user_data,
                                  struct GrcDecision *out);

/**
 * Releases the transcript inside a decision and resets it to NULL.
 *
 * # Safety
 * `d` must point to a decision filled by this library, or be NULL.
 */
void grc_decision_free(struct GrcDecision *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRC_H */
