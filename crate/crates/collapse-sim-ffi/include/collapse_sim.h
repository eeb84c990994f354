/* C interface of the collapse-sim simulator. Generated by cbindgen; do not edit. */

#ifndef COLLAPSE_SIM_H
#define COLLAPSE_SIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Three-point phase-factor distribution (the model default).
 */
#define CSIM_PHASE_DIST_THREE_POINT 0

/**
 * Phase factor fixed at 1; violates the mean-amplitude identity, for
 * ablation runs only.
 */
#define CSIM_PHASE_DIST_DETERMINISTIC_REAL 1

/**
 * Status codes returned by every fallible call.
 */
typedef enum CsimStatus {
  /**
   * Success.
   */
  CSIM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CSIM_STATUS_NULL_POINTER = 1,
  /**
   * An argument failed validation (bad epsilon, weight sum, index...).
   */
  CSIM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The operation is not defined for the given state (collapsed state,
   * destroyed packet, off-grid start point...).
   */
  CSIM_STATUS_DOMAIN_ERROR = 3,
  /**
   * A caller-provided buffer is shorter than the packet count.
   */
  CSIM_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * An internal numerical routine failed; not expected in normal use.
   */
  CSIM_STATUS_INTERNAL_ERROR = 5,
} CsimStatus;

/**
 * Opaque deterministic RNG stream handle.
 */
typedef struct CsimRng CsimRng;

/**
 * Opaque wave-state handle.
 */
typedef struct CsimState CsimState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a state from `len` weights and phases. On success writes a handle
 * to `out`; free it with [`csim_state_free`].
 *
 * # Safety
 * `weights` and `phases` must point to `len` readable doubles and `out`
 * must be a valid writable pointer.
 */
enum CsimStatus csim_state_new(const double *weights,
                               const double *phases,
                               size_t len,
                               struct CsimState **out);

/**
 * Deep copy of a state handle.
 *
 * # Safety
 * `state` must be a live handle from this library and `out` writable.
 */
enum CsimStatus csim_state_clone(const struct CsimState *state, struct CsimState **out);

/**
 * Frees a state handle. Passing null is a no-op.
 *
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void csim_state_free(struct CsimState *state);

/**
 * Number of packets (live and destroyed).
 *
 * # Safety
 * `state` must be a live handle, `out` writable.
 */
enum CsimStatus csim_state_packet_count(const struct CsimState *state, size_t *out);

/**
 * Current total weight of the state.
 *
 * # Safety
 * `state` must be a live handle, `out` writable.
 */
enum CsimStatus csim_state_total_weight(const struct CsimState *state, double *out);

/**
 * Whether exactly one packet is live.
 *
 * # Safety
 * `state` must be a live handle, `out` writable.
 */
enum CsimStatus csim_state_is_collapsed(const struct CsimState *state, bool *out);

/**
 * Index of the sole live packet, or -1 if the state is not collapsed.
 *
 * # Safety
 * `state` must be a live handle, `out` writable.
 */
enum CsimStatus csim_state_surviving_packet(const struct CsimState *state, int64_t *out);

/**
 * Copies the packet weights into `buf` (at least the packet count long).
 *
 * # Safety
 * `state` must be a live handle and `buf` writable for `len` doubles.
 */
enum CsimStatus csim_state_weights(const struct CsimState *state, double *buf, size_t len);

/**
 * Copies the packet phases into `buf` (at least the packet count long).
 *
 * # Safety
 * `state` must be a live handle and `buf` writable for `len` doubles.
 */
enum CsimStatus csim_state_phases(const struct CsimState *state, double *buf, size_t len);

/**
 * Creates the deterministic RNG stream `(seed, stream)`; the same pair
 * always reproduces the same draws. Free with [`csim_rng_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum CsimStatus csim_rng_new(uint64_t seed, uint64_t stream, struct CsimRng **out);

/**
 * Frees an RNG handle. Passing null is a no-op.
 *
 * # Safety
 * `rng` must be null or a handle not yet freed.
 */
void csim_rng_free(struct CsimRng *rng);

/**
 * Applies one fluctuation tick (weight-removal cascade followed by the
 * weight gain) in place. A collapsed state is left untouched. If
 * `cascade_len` is non-null it receives the number of removal draws
 * (0 for a collapsed state).
 *
 * # Safety
 * `state` and `rng` must be live handles; `cascade_len` may be null.
 */
enum CsimStatus csim_fluctuate(struct CsimState *state,
                               double epsilon,
                               int32_t phase_dist,
                               struct CsimRng *rng,
                               size_t *cascade_len);

/**
 * Applies only the weight-removal cascade (total weight drops by exactly
 * `epsilon`).
 *
 * # Safety
 * `state` and `rng` must be live handles; `cascade_len` may be null.
 */
enum CsimStatus csim_apply_nsf_cascade(struct CsimState *state,
                                       double epsilon,
                                       int32_t phase_dist,
                                       struct CsimRng *rng,
                                       size_t *cascade_len);

/**
 * Applies only the weight gain (total weight rises by exactly `epsilon`).
 *
 * # Safety
 * `state` and `rng` must be live handles.
 */
enum CsimStatus csim_apply_psf(struct CsimState *state,
                               double epsilon,
                               int32_t phase_dist,
                               struct CsimRng *rng);

/**
 * Runs one trajectory to collapse or the step budget. Writes the surviving
 * packet index (-1 if the budget ran out) and the step count at collapse.
 * Deterministic in `(seed, trajectory_index)`.
 *
 * # Safety
 * `weights`/`phases` must point to `len` doubles; the out-pointers must be
 * writable.
 */
enum CsimStatus csim_run_trajectory(const double *weights,
                                    const double *phases,
                                    size_t len,
                                    double epsilon,
                                    int32_t phase_dist,
                                    uint64_t seed,
                                    uint64_t trajectory_index,
                                    uint64_t max_steps,
                                    int64_t *surviving_packet,
                                    uint64_t *steps);

/**
 * Exact absorption probability at weight 1 for the single-packet walk
 * started from the grid point `x0` (1/epsilon must be an integer and `x0`
 * a multiple of epsilon).
 *
 * # Safety
 * `out` must be writable.
 */
enum CsimStatus csim_absorption_oracle(double epsilon, double x0, double *out);

/**
 * The quantum-selection time: the slowest relaxation time of the ensemble
 * matrix for the grid defined by `epsilon`, in units set by `tau`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CsimStatus csim_selection_time(double epsilon, double tau, double *out);

/**
 * Library version as a static C string.
 */
const char *csim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLAPSE_SIM_H */
