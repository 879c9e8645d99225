#ifndef AOSI_H
#define AOSI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AosiStatus {
  AOSI_STATUS_OK = 0,
  AOSI_STATUS_NULL_POINTER = 1,
  AOSI_STATUS_INVALID_ARGUMENT = 2,
  AOSI_STATUS_CONFIG = 3,
  AOSI_STATUS_RUNTIME = 4,
  AOSI_STATUS_PANIC = 5,
} AosiStatus;

/**
 * Run configuration handle.
 */
typedef struct AosiConfig AosiConfig;

/**
 * One simulated episode driven by caller-chosen actions.
 */
typedef struct AosiSimulator AosiSimulator;

/**
 * What happened in one executed period.
 */
typedef struct AosiStep {
  double reward;
  /**
   * Mean over sources of the period-average AoSI.
   */
  double mean_aosi;
  /**
   * Transmission latency in seconds; negative when idle.
   */
  double latency_s;
  bool delivered;
} AosiStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *aosi_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aosi_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum AosiStatus aosi_config_default(struct AosiConfig **out);

/**
 * Reads and validates a TOML config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AosiStatus aosi_config_load(const char *path, struct AosiConfig **out);

/**
 * Overrides the number of sources, sampling interval and master seed.
 *
 * # Safety
 * `cfg` must come from this library and not yet be freed.
 */
enum AosiStatus aosi_config_set_point(struct AosiConfig *cfg,
                                      size_t sources,
                                      double sampling_interval_s,
                                      uint64_t master_seed);

/**
 * # Safety
 * `cfg` must come from this library, or be null.
 */
void aosi_config_free(struct AosiConfig *cfg);

/**
 * Similarity of the configured model at `k` symbols per word and an SNR
 * given in dB.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum AosiStatus aosi_similarity(const struct AosiConfig *cfg,
                                uint32_t k,
                                double snr_db,
                                double *out);

/**
 * Starts an episode. The config is copied; it may be freed afterwards.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum AosiStatus aosi_sim_new(const struct AosiConfig *cfg,
                             uint64_t episode_seed,
                             struct AosiSimulator **out);

/**
 * # Safety
 * `sim` must come from this library, or be null.
 */
void aosi_sim_free(struct AosiSimulator *sim);

/**
 * Number of joint actions: index 0 idles, `1 + m*K + (k-1)` schedules
 * source `m` with `k` symbols per word.
 *
 * # Safety
 * `sim` must be a live handle.
 */
size_t aosi_sim_action_count(const struct AosiSimulator *sim);

/**
 * Length of the observation vector (three features per source).
 *
 * # Safety
 * `sim` must be a live handle.
 */
size_t aosi_sim_state_len(const struct AosiSimulator *sim);

/**
 * Writes the normalized observation `[AoSI, AoI, SNR]` per source.
 *
 * # Safety
 * `buf` must hold at least `len` doubles.
 */
enum AosiStatus aosi_sim_state(const struct AosiSimulator *sim, double *buf, size_t len);

/**
 * Executes one period with the given joint action index.
 *
 * # Safety
 * `sim` must be a live handle; `out` may be null.
 */
enum AosiStatus aosi_sim_step(struct AosiSimulator *sim, size_t action, struct AosiStep *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AOSI_H */
