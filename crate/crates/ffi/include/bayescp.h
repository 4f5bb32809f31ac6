#ifndef BAYESCP_H
#define BAYESCP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BcpStatus {
  BCP_STATUS_OK = 0,
  BCP_STATUS_NULL_POINTER = 1,
  BCP_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad JSON, unknown algorithm, bad level or other configuration problem.
   */
  BCP_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A score outside `[0, R]`.
   */
  BCP_STATUS_OUT_OF_DOMAIN = 4,
  BCP_STATUS_SNAPSHOT = 5,
  BCP_STATUS_PANIC = 6,
  BCP_STATUS_INTERNAL = 7,
} BcpStatus;

/**
 * Opaque predictor handle.
 */
typedef struct BcpPredictor BcpPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a predictor from a JSON config such as `{"algorithm": "bayesian"}`.
 * `horizon` (0 for unknown) sets the default grid size `ceil(sqrt(horizon))`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BcpStatus bcp_predictor_from_json(const char *json,
                                       uint64_t horizon,
                                       struct BcpPredictor **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void bcp_predictor_free(struct BcpPredictor *p);

/**
 * Answers a query at level `alpha` for the current round and records it.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum BcpStatus bcp_predictor_predict(struct BcpPredictor *p, double alpha, double *out);

/**
 * Like [`bcp_predictor_predict`] but leaves no trace in the predictor.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum BcpStatus bcp_predictor_threshold(const struct BcpPredictor *p, double alpha, double *out);

/**
 * Reveals the true score and advances to the next round. If `out_loss` is
 * non-null it receives the summed quantile loss of this round's queries.
 *
 * # Safety
 * `p` must be a live handle; `out_loss` may be null.
 */
enum BcpStatus bcp_predictor_update(struct BcpPredictor *p, double r_star, double *out_loss);

/**
 * Current round, starting at 1; 0 for a null handle.
 *
 * # Safety
 * `p` must be a live handle or null.
 */
uint64_t bcp_predictor_round(const struct BcpPredictor *p);

/**
 * Serializes the predictor to JSON. Free the string with [`bcp_string_free`].
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum BcpStatus bcp_predictor_snapshot(const struct BcpPredictor *p, char **out);

/**
 * Rebuilds a predictor from [`bcp_predictor_snapshot`] output.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BcpStatus bcp_predictor_restore(const char *json, struct BcpPredictor **out);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void bcp_string_free(char *s);

/**
 * Quantile loss `(1[r >= r_star] - alpha)(r - r_star)`.
 */
double bcp_quantile_loss(double alpha, double r, double r_star);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bcp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bcp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAYESCP_H */
