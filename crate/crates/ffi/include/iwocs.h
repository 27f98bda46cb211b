#ifndef IWOCS_H
#define IWOCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum IwocsStatus {
  IWOCS_STATUS_OK = 0,
  IWOCS_STATUS_NULL_POINTER = 1,
  IWOCS_STATUS_INVALID_ARGUMENT = 2,
  IWOCS_STATUS_INVALID_MDP = 3,
  IWOCS_STATUS_NOT_CONVERGED = 4,
  IWOCS_STATUS_PARSE_ERROR = 5,
  IWOCS_STATUS_BUFFER_TOO_SMALL = 6,
  IWOCS_STATUS_INTERNAL = 7,
} IwocsStatus;

/**
 * How an IWOCS run ended.
 */
typedef enum IwocsRunStatus {
  IWOCS_RUN_STATUS_CONVERGED = 0,
  IWOCS_RUN_STATUS_MAX_ITERATIONS = 1,
  IWOCS_RUN_STATUS_REPEATED_WORST_CASE = 2,
} IwocsRunStatus;

/**
 * Finite MDP handle.
 */
typedef struct IwocsMdp IwocsMdp;

/**
 * Ordered list of structurally compatible MDPs.
 */
typedef struct IwocsModelSet IwocsModelSet;

/**
 * Terminal numbers of an IWOCS run.
 */
typedef struct IwocsRunSummary {
  /**
   * Completed iterations.
   */
  size_t iterations;
  int32_t status;
  /**
   * `Q_i(s0, pi_i(s0))` of the returned policy.
   */
  double candidate_value;
  /**
   * Adversarial value of the returned policy.
   */
  double worst_value;
  /**
   * Set index of the worst model.
   */
  size_t worst_index;
  /**
   * Standard Bellman backups spent in all inner solves.
   */
  size_t total_backups;
} IwocsRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *iwocs_last_error(void);

/**
 * Parses an MDP from its JSON document.
 */
enum IwocsStatus iwocs_mdp_from_json(const char *json, struct IwocsMdp **out);

/**
 * Windy walk on the shipped map.
 */
enum IwocsStatus iwocs_mdp_windy_walk(double alpha, struct IwocsMdp **out);

/**
 * Windy walk on a custom ASCII map. `zones` holds `n_zones` flattened
 * `(row, col, exponent)` triples and may be null when `n_zones` is 0.
 */
enum IwocsStatus iwocs_mdp_windy_walk_map(const char *map_text,
                                          const uint32_t *zones,
                                          size_t n_zones,
                                          double alpha,
                                          struct IwocsMdp **out);

/**
 * Serializes an MDP to JSON. Free the result with [`iwocs_string_free`].
 */
enum IwocsStatus iwocs_mdp_to_json(const struct IwocsMdp *mdp, char **out);

void iwocs_string_free(char *s);

void iwocs_mdp_free(struct IwocsMdp *mdp);

/**
 * Number of states, 0 for a null handle.
 */
size_t iwocs_mdp_n_states(const struct IwocsMdp *mdp);

size_t iwocs_mdp_n_actions(const struct IwocsMdp *mdp);

size_t iwocs_mdp_start_state(const struct IwocsMdp *mdp);

/**
 * Value iteration from zero. Writes `n_states` values and, when
 * `policy_out` is non-null, the greedy policy. A `max_iters` of 0 selects
 * the default budget. Returns `IWOCS_STATUS_NOT_CONVERGED` (after writing
 * the last iterate) when the budget runs out.
 */
enum IwocsStatus iwocs_value_iteration(const struct IwocsMdp *mdp,
                                       double tol,
                                       size_t max_iters,
                                       double *values_out,
                                       size_t values_len,
                                       uint32_t *policy_out,
                                       size_t policy_len,
                                       size_t *iterations_out);

/**
 * Exact evaluation of a deterministic policy; writes `n_states` values.
 */
enum IwocsStatus iwocs_evaluate_policy(const struct IwocsMdp *mdp,
                                       const uint32_t *policy,
                                       size_t policy_len,
                                       double tol,
                                       double *values_out,
                                       size_t values_len);

/**
 * Monte-Carlo estimate of the discounted return from the start state.
 */
enum IwocsStatus iwocs_monte_carlo_return(const struct IwocsMdp *mdp,
                                          const uint32_t *policy,
                                          size_t policy_len,
                                          size_t n_rollouts,
                                          size_t horizon,
                                          uint64_t seed,
                                          double *mean_out,
                                          double *std_error_out);

/**
 * Empty model set.
 */
struct IwocsModelSet *iwocs_set_new(void);

/**
 * Windy-walk models on a `grid_points`-point alpha grid over `[0, 0.5]`.
 */
enum IwocsStatus iwocs_set_windy_walk(size_t grid_points, struct IwocsModelSet **out);

/**
 * Appends a copy of `mdp`; it must match the shape of earlier members.
 */
enum IwocsStatus iwocs_set_push(struct IwocsModelSet *set, const struct IwocsMdp *mdp);

size_t iwocs_set_len(const struct IwocsModelSet *set);

void iwocs_set_free(struct IwocsModelSet *set);

/**
 * Robust value iteration over the rectangular closure of the set. Writes
 * `n_states` robust values.
 */
enum IwocsStatus iwocs_robust_value_iteration(const struct IwocsModelSet *set,
                                              double tol,
                                              size_t max_iters,
                                              double *values_out,
                                              size_t values_len,
                                              size_t *iterations_out);

/**
 * IWOCS with exhaustive search over the set and exact evaluation, seeded
 * with member `t0_index`. Writes the candidate policy when `policy_out` is
 * non-null.
 */
enum IwocsStatus iwocs_run(const struct IwocsModelSet *set,
                           size_t t0_index,
                           double epsilon,
                           double vi_tol,
                           size_t max_iterations,
                           struct IwocsRunSummary *summary_out,
                           uint32_t *policy_out,
                           size_t policy_len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *iwocs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IWOCS_H */
