#ifndef NRMAB_H
#define NRMAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NrmabStatus {
  NRMAB_STATUS_OK = 0,
  NRMAB_STATUS_NULL_POINTER = 1,
  NRMAB_STATUS_INVALID_UTF8 = 2,
  NRMAB_STATUS_INVALID_ARGUMENT = 3,
  NRMAB_STATUS_CAP_EXCEEDED = 4,
  NRMAB_STATUS_BUFFER_TOO_SMALL = 5,
  NRMAB_STATUS_CHECK_FAILED = 6,
  NRMAB_STATUS_PANIC = 7,
} NrmabStatus;

/**
 * A validated problem instance.
 */
typedef struct NrmabInstance NrmabInstance;

/**
 * A policy bound to the instance it was built for.
 */
typedef struct NrmabPolicy NrmabPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nrmab_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void nrmab_string_free(char *s);

/**
 * Parses a canonical instance document (JSON).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NrmabStatus nrmab_instance_from_json(const char *json, struct NrmabInstance **out);

/**
 * Draws a contact-network style instance with exactly `edges` edges and
 * unit rewards.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NrmabStatus nrmab_instance_generate(size_t n,
                                         size_t edges,
                                         size_t budget_k,
                                         double gamma,
                                         double cascade_weight,
                                         uint64_t seed,
                                         struct NrmabInstance **out);

/**
 * # Safety
 * `inst` must come from this library and not have been freed already.
 */
void nrmab_instance_free(struct NrmabInstance *inst);

/**
 * Canonical JSON of the instance.
 *
 * # Safety
 * `inst` must be a live handle and `out` a valid pointer.
 */
enum NrmabStatus nrmab_instance_to_json(const struct NrmabInstance *inst, char **out);

/**
 * Node count; 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t nrmab_instance_num_nodes(const struct NrmabInstance *inst);

/**
 * Edge count; 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t nrmab_instance_num_edges(const struct NrmabInstance *inst);

/**
 * Budget `k`; 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t nrmab_instance_budget(const struct NrmabInstance *inst);

/**
 * `R(s)` for a 0/1 state vector of length `n`.
 *
 * # Safety
 * `state` must point to `n` bytes and `out` be a valid pointer.
 */
enum NrmabStatus nrmab_reward(const struct NrmabInstance *inst,
                              const uint8_t *state,
                              size_t n,
                              double *out);

/**
 * Samples one transition plus cascade. The coins come from the
 * environment stream `(seed, index)`, the same stream the evaluation
 * harness uses for run `index`, so a call is reproducible.
 *
 * # Safety
 * `state` and `next_state` must point to `n` bytes, `action` to
 * `action_len` node ids (it may be null when `action_len` is 0).
 */
enum NrmabStatus nrmab_step(const struct NrmabInstance *inst,
                            const uint8_t *state,
                            size_t n,
                            const uint32_t *action,
                            size_t action_len,
                            uint64_t seed,
                            uint64_t index,
                            uint8_t *next_state);

/**
 * Builds a named policy. `options_json` may be null for defaults; `seed`
 * keys any training the policy performs.
 *
 * # Safety
 * `inst` must be a live handle, `name` a NUL-terminated string,
 * `options_json` null or NUL-terminated, `out` a valid pointer.
 */
enum NrmabStatus nrmab_policy_new(const struct NrmabInstance *inst,
                                  const char *name,
                                  const char *options_json,
                                  uint64_t seed,
                                  struct NrmabPolicy **out);

/**
 * # Safety
 * `policy` must come from this library and not have been freed already.
 */
void nrmab_policy_free(struct NrmabPolicy *policy);

/**
 * Chooses an action set for `state`, writing sorted node ids into
 * `out_action`. Policy randomness comes from the stream `(seed, index)`.
 * Returns `NRMAB_BUFFER_TOO_SMALL` with `*out_len` set to the required
 * size when `capacity` is short.
 *
 * # Safety
 * `state` must point to `n` bytes, `out_action` to `capacity` slots and
 * `out_len` be a valid pointer.
 */
enum NrmabStatus nrmab_policy_select(const struct NrmabPolicy *policy,
                                     const uint8_t *state,
                                     size_t n,
                                     uint64_t seed,
                                     uint64_t index,
                                     uint32_t *out_action,
                                     size_t capacity,
                                     size_t *out_len);

/**
 * Runs an experiment described by `config_json` (policies, seeds,
 * runs_per_seed, horizon, optional timing and options) and returns the
 * summary document.
 *
 * # Safety
 * `inst` must be a live handle, `config_json` NUL-terminated and
 * `out_summary_json` a valid pointer.
 */
enum NrmabStatus nrmab_evaluate(const struct NrmabInstance *inst,
                                const char *config_json,
                                char **out_summary_json);

/**
 * Runs every theory check on the instance with the default suite settings
 * and `seed`. The report array is written even when a check fails, in
 * which case the status is `NRMAB_CHECK_FAILED`.
 *
 * # Safety
 * `inst` must be a live handle and `out_report_json` a valid pointer.
 */
enum NrmabStatus nrmab_verify(const struct NrmabInstance *inst,
                              uint64_t seed,
                              char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NRMAB_H */
