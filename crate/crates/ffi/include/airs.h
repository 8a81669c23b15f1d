#ifndef AIRS_H
#define AIRS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AirsStatus {
  AIRS_STATUS_OK = 0,
  AIRS_STATUS_NULL_POINTER = 1,
  AIRS_STATUS_INVALID_ARGUMENT = 2,
  AIRS_STATUS_CONFIG = 3,
  AIRS_STATUS_NOT_FOUND = 4,
  AIRS_STATUS_SHAPE = 5,
  AIRS_STATUS_NUMERIC = 6,
  AIRS_STATUS_STATE = 7,
  AIRS_STATUS_IO = 8,
  AIRS_STATUS_PANIC = 9,
} AirsStatus;

/**
 * Opaque UCB bandit.
 */
typedef struct AirsBandit AirsBandit;

/**
 * Opaque reward module.
 */
typedef struct AirsReward AirsReward;

/**
 * Borrowed view of one rollout. `dones` and `episode_ids` may be NULL; the
 * others are required.
 */
typedef struct AirsRollout {
  size_t n_steps;
  size_t n_envs;
  size_t obs_dim;
  /**
   * `n_steps * n_envs * obs_dim` values.
   */
  const float *observations;
  /**
   * `n_steps * n_envs` values.
   */
  const int64_t *actions;
  /**
   * `n_steps * n_envs` extrinsic rewards.
   */
  const float *rewards;
  /**
   * `n_steps * n_envs * obs_dim` values.
   */
  const float *next_observations;
  /**
   * `n_steps * n_envs` flags, nonzero for a terminal step. NULL means none.
   */
  const uint8_t *dones;
  /**
   * `n_steps * n_envs` episode ids. NULL derives them from `dones`,
   * continuing the per-env count from the previous call.
   */
  const uint64_t *episode_ids;
} AirsRollout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *airs_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *airs_last_error(void);

/**
 * Build a reward module by name (`id`, `re3`, `rise`, `revd`, `ride`,
 * `pseudo_counts`, `icm`, `rnd`, `ngu`). `params_json` is a JSON object of
 * hyperparameters overriding the defaults, or NULL.
 *
 * # Safety
 * `module` and a non-NULL `params_json` must be NUL-terminated strings and
 * `out` must be writable.
 */
enum AirsStatus airs_reward_new(const char *module,
                                size_t obs_dim,
                                size_t n_actions,
                                const char *params_json,
                                uint64_t seed,
                                struct AirsReward **out);

/**
 * Release a module. NULL is ignored.
 *
 * # Safety
 * `h` must come from [`airs_reward_new`] and not be used afterwards.
 */
void airs_reward_free(struct AirsReward *h);

/**
 * Intrinsic rewards for one rollout, written to `out` (`out_len` must equal
 * `n_steps * n_envs`). Stateful modules update as a side effect.
 *
 * # Safety
 * `h` must be a live handle, `rollout` must point to a rollout whose buffers
 * match its shape fields, and `out` must hold `out_len` floats.
 */
enum AirsStatus airs_reward_compute(struct AirsReward *h,
                                    const struct AirsRollout *rollout,
                                    float *out,
                                    size_t out_len);

/**
 * Forget episodic state and restart the derived episode ids.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum AirsStatus airs_reward_reset(struct AirsReward *h);

/**
 * Bandit over `n_arms` named arms with exploration constant `c` and a return
 * window of `window` entries per arm.
 *
 * # Safety
 * `arms` must hold `n_arms` NUL-terminated strings and `out` must be writable.
 */
enum AirsStatus airs_bandit_new(const char *const *arms,
                                size_t n_arms,
                                double c,
                                size_t window,
                                struct AirsBandit **out);

/**
 * Release a bandit. NULL is ignored.
 *
 * # Safety
 * `h` must come from [`airs_bandit_new`] and not be used afterwards.
 */
void airs_bandit_free(struct AirsBandit *h);

/**
 * Number of arms, or 0 for NULL.
 *
 * # Safety
 * `h` must be NULL or a live handle.
 */
size_t airs_bandit_n_arms(const struct AirsBandit *h);

/**
 * Index of the arm with the highest upper confidence bound; ties go to the
 * lowest index.
 *
 * # Safety
 * `h` must be a live handle and `arm` writable.
 */
enum AirsStatus airs_bandit_select(const struct AirsBandit *h, size_t *arm);

/**
 * Record the mean episodic return observed after pulling the named arm.
 *
 * # Safety
 * `h` must be a live handle and `arm` a NUL-terminated string.
 */
enum AirsStatus airs_bandit_record(struct AirsBandit *h, const char *arm, double mean_return);

/**
 * Record by arm index.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum AirsStatus airs_bandit_record_index(struct AirsBandit *h, size_t arm, double mean_return);

/**
 * Copy the per-arm value estimates into `out` (`len` = number of arms).
 *
 * # Safety
 * `h` must be a live handle and `out` hold `len` doubles.
 */
enum AirsStatus airs_bandit_q(const struct AirsBandit *h, double *out, size_t len);

/**
 * Copy the per-arm selection counts into `out` (`len` = number of arms).
 *
 * # Safety
 * `h` must be a live handle and `out` hold `len` integers.
 */
enum AirsStatus airs_bandit_counts(const struct AirsBandit *h, uint64_t *out, size_t len);

/**
 * Copy the stored returns of `arm`, oldest first, into `out` (capacity
 * `cap`). The number written goes to `written`.
 *
 * # Safety
 * `h` must be a live handle, `out` hold `cap` doubles and `written` be
 * writable.
 */
enum AirsStatus airs_bandit_window(const struct AirsBandit *h,
                                   size_t arm,
                                   double *out,
                                   size_t cap,
                                   size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRS_H */
