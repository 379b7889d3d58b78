#ifndef CYLCONF_H
#define CYLCONF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CylconfStatus {
  CYLCONF_STATUS_OK = 0,
  CYLCONF_STATUS_NULL_POINTER = 1,
  CYLCONF_STATUS_INVALID_ARGUMENT = 2,
  CYLCONF_STATUS_NUMERICAL = 3,
  CYLCONF_STATUS_IO = 4,
  CYLCONF_STATUS_BUFFER_TOO_SMALL = 5,
  CYLCONF_STATUS_PANIC = 6,
} CylconfStatus;

typedef enum CylconfScheme {
  CYLCONF_SCHEME_RK4 = 0,
  CYLCONF_SCHEME_RK2 = 1,
  CYLCONF_SCHEME_EULER_FORWARD = 2,
} CylconfScheme;

typedef enum CylconfRegime {
  CYLCONF_REGIME_NS_A = 0,
  CYLCONF_REGIME_NS_B = 1,
  CYLCONF_REGIME_EULER = 2,
} CylconfRegime;

/**
 * Opaque simulation state.
 */
typedef struct CylconfState CylconfState;

/**
 * Scalar diagnostics of a state. `center_x1` is NaN when the total mass
 * vanishes.
 */
typedef struct CylconfDiagnostics {
  double time;
  double total_mass;
  double diameter;
  double max_abs_x1;
  double center_x1;
  double first_moment_x1;
  double hamiltonian;
} CylconfDiagnostics;

/**
 * Log-domain iteration bound for one time.
 */
typedef struct CylconfBound {
  uint64_t n;
  double log_r0;
  double log_h;
  /**
   * Capped at `log m0`.
   */
  double log_recursive;
  double log_recursive_uncapped;
  double log_closed_form;
} CylconfBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next `cylconf_*` call on the same thread.
 */
const char *cylconf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cylconf_version(void);

/**
 * Periodic Green function `G(x, y)`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one double.
 */
enum CylconfStatus cylconf_green(double x1, double x2, double y1, double y2, double *out);

/**
 * `(1/2pi) grad_perp G(x, y)` regularised by `core_radius`, written to
 * `out[0..2]`. Coincident points give zero.
 *
 * # Safety
 * `out` must be null or point to two writable doubles.
 */
enum CylconfStatus cylconf_velocity_kernel(double x1,
                                           double x2,
                                           double y1,
                                           double y2,
                                           double core_radius,
                                           double *out);

/**
 * Check `|dG/dx2| <= c1 exp(-c2 r) / r` on a grid of `samples` points.
 *
 * # Safety
 * `max_ratio` and `pass` must be null or writable.
 */
enum CylconfStatus cylconf_validate_decay_envelope(double c1,
                                                   double c2,
                                                   size_t samples,
                                                   double *max_ratio,
                                                   bool *pass);

/**
 * Standard patch (uniform disk of radius 1 at `(0, pi)`, unit mass)
 * discretised with about `n_blobs` blobs.
 *
 * # Safety
 * `out` must be null or writable; on success it receives a handle owned
 * by the caller.
 */
enum CylconfStatus cylconf_state_new_standard(size_t n_blobs,
                                              double viscosity,
                                              uint64_t seed,
                                              struct CylconfState **out);

/**
 * Patch described by a JSON `PatchSpec` object.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` as in
 * [`cylconf_state_new_standard`].
 */
enum CylconfStatus cylconf_state_new_patch_json(const char *json,
                                                double viscosity,
                                                uint64_t seed,
                                                struct CylconfState **out);

/**
 * Explicit blobs sharing one blob core (> 0); `kernel_core` regularises
 * the velocity kernel and may be 0 for point vortices.
 *
 * # Safety
 * `x1`, `x2` and `gamma` must each point to `n` readable doubles; `out` as
 * in [`cylconf_state_new_standard`].
 */
enum CylconfStatus cylconf_state_new_blobs(const double *x1,
                                           const double *x2,
                                           const double *gamma,
                                           size_t n,
                                           double blob_core,
                                           double kernel_core,
                                           double viscosity,
                                           uint64_t seed,
                                           struct CylconfState **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `state` must be null or a handle from this library not yet freed.
 */
void cylconf_state_free(struct CylconfState *state);

/**
 * Number of blobs (0 for null).
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t cylconf_state_len(const struct CylconfState *state);

/**
 * Current time (NaN for null).
 *
 * # Safety
 * `state` must be null or a live handle.
 */
double cylconf_state_time(const struct CylconfState *state);

/**
 * One inviscid step of length `dt`; the state must have zero viscosity.
 *
 * # Safety
 * `state` must be null or a live handle not used concurrently.
 */
enum CylconfStatus cylconf_state_step_euler(struct CylconfState *state,
                                            double dt,
                                            enum CylconfScheme scheme);

/**
 * One viscous splitting step: RK4 transport over `dt`, then Gaussian
 * displacements drawn from the state's seed and step counter.
 *
 * # Safety
 * `state` must be null or a live handle not used concurrently.
 */
enum CylconfStatus cylconf_state_step_ns(struct CylconfState *state, double dt);

/**
 * Copy positions and circulations into caller buffers of length `cap`.
 *
 * # Safety
 * Each non-null buffer must hold `cap` writable doubles; null buffers are
 * skipped.
 */
enum CylconfStatus cylconf_state_blobs(const struct CylconfState *state,
                                       double *x1,
                                       double *x2,
                                       double *gamma,
                                       size_t cap);

/**
 * Induced velocity at every blob, written to `u1[0..n]`, `u2[0..n]`.
 *
 * # Safety
 * `u1` and `u2` must hold `cap` writable doubles.
 */
enum CylconfStatus cylconf_state_velocity(const struct CylconfState *state,
                                          double *u1,
                                          double *u2,
                                          size_t cap);

/**
 * Scalar diagnostics of the current state.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum CylconfStatus cylconf_state_diagnostics(const struct CylconfState *state,
                                             struct CylconfDiagnostics *out);

/**
 * Tail masses `m(h) = sum of gamma over |x1| > h` for `n` thresholds.
 *
 * # Safety
 * `h` must hold `n` readable doubles and `out` `n` writable doubles.
 */
enum CylconfStatus cylconf_state_tail_mass(const struct CylconfState *state,
                                           const double *h,
                                           size_t n,
                                           double *out);

/**
 * Replay the iteration bound at `log t`. `alpha` is used by the ns_a and
 * euler regimes, `beta` and `delta` by ns_b.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum CylconfStatus cylconf_replay_bound(enum CylconfRegime regime,
                                        double log_t,
                                        double alpha,
                                        double beta,
                                        double delta,
                                        double big_c,
                                        double m0,
                                        double support_radius,
                                        struct CylconfBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYLCONF_H */
