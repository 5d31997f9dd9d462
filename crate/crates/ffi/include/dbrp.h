#ifndef DBRP_H
#define DBRP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DbrpStatus {
  DBRP_STATUS_OK = 0,
  DBRP_STATUS_NULL_POINTER = 1,
  DBRP_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON, invalid scene or plan, bad argument.
   */
  DBRP_STATUS_INVALID_INPUT = 3,
  DBRP_STATUS_NO_PLAN_FOUND = 4,
  /**
   * A panic was caught at the boundary.
   */
  DBRP_STATUS_INTERNAL = 5,
} DbrpStatus;

/**
 * A parsed scene: start state, goal and cost model.
 */
typedef struct DbrpInstance DbrpInstance;

typedef struct DbrpPlan DbrpPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dbrp_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *dbrp_last_error_message(void);

/**
 * Parses a scene document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DbrpStatus dbrp_instance_from_json(const char *json, struct DbrpInstance **out);

/**
 * # Safety
 * `inst` must come from [`dbrp_instance_from_json`] and not be used again.
 */
void dbrp_instance_free(struct DbrpInstance *inst);

/**
 * Plans `inst` with `algo` (`astar-ds`, `astar-ss`, `astar-ns`, `mcts-ds`
 * or `mcts-ns`) within `time_limit_s` seconds.
 *
 * # Safety
 * Pointers must be valid; `algo` NUL-terminated.
 */
enum DbrpStatus dbrp_plan(const struct DbrpInstance *inst,
                          const char *algo,
                          double time_limit_s,
                          uint64_t seed,
                          struct DbrpPlan **out);

/**
 * Parses a plan document and replays it from the instance start.
 *
 * # Safety
 * Pointers must be valid; `json` NUL-terminated.
 */
enum DbrpStatus dbrp_plan_from_json(const struct DbrpInstance *inst,
                                    const char *json,
                                    struct DbrpPlan **out);

/**
 * # Safety
 * `plan` must come from this library and not be used again.
 */
void dbrp_plan_free(struct DbrpPlan *plan);

/**
 * Number of actions, or 0 for a null handle.
 *
 * # Safety
 * `plan` must be null or valid.
 */
size_t dbrp_plan_len(const struct DbrpPlan *plan);

/**
 * Total cost including the return home, or NaN for a null handle.
 *
 * # Safety
 * `plan` must be null or valid.
 */
double dbrp_plan_cost(const struct DbrpPlan *plan);

/**
 * Serializes a plan. Free the string with [`dbrp_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum DbrpStatus dbrp_plan_to_json(const struct DbrpInstance *inst,
                                  const struct DbrpPlan *plan,
                                  char **out);

/**
 * # Safety
 * `s` must come from this library and not be used again.
 */
void dbrp_string_free(char *s);

/**
 * Prunes and buffer-optimizes `plan`; `mode` is `static` or `dynamic`.
 *
 * # Safety
 * Pointers must be valid; `mode` NUL-terminated.
 */
enum DbrpStatus dbrp_refine(const struct DbrpInstance *inst,
                            const struct DbrpPlan *plan,
                            const char *mode,
                            struct DbrpPlan **out);

/**
 * Expected succeeded cost.
 *
 * # Safety
 * `out` must be valid.
 */
enum DbrpStatus dbrp_esc(double avg_cost, double success_rate, double *out);

/**
 * Mean of `len` ESC values.
 *
 * # Safety
 * `values` must point to `len` doubles; `out` must be valid.
 */
enum DbrpStatus dbrp_ops(const double *values, size_t len, double *out);

/**
 * Percentage improvement of `ops_b` over `ops_a`.
 */
double dbrp_pir(double ops_a, double ops_b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DBRP_H */
