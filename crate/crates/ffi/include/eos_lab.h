#ifndef EOS_LAB_H
#define EOS_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EosStatus {
  EOS_STATUS_OK = 0,
  EOS_STATUS_NULL_POINTER = 1,
  EOS_STATUS_INVALID_ARGUMENT = 2,
  EOS_STATUS_DIMENSION_MISMATCH = 3,
  EOS_STATUS_NUMERICAL = 4,
  // The requested quantity was not produced by this run.
  EOS_STATUS_NOT_AVAILABLE = 5,
  EOS_STATUS_BUFFER_TOO_SMALL = 6,
  EOS_STATUS_PANIC = 7,
} EosStatus;

typedef enum EosRegime {
  EOS_REGIME_GRADIENT_FLOW = 0,
  EOS_REGIME_EOS_SUB = 1,
  EOS_REGIME_EOS_SUPER = 2,
  EOS_REGIME_PERIODIC = 3,
  EOS_REGIME_CHAOTIC = 4,
  EOS_REGIME_DIVERGENT = 5,
  EOS_REGIME_INCONCLUSIVE = 6,
} EosRegime;

typedef enum EosTermination {
  EOS_TERMINATION_MAX_STEPS = 0,
  EOS_TERMINATION_CONVERGED = 1,
  EOS_TERMINATION_DIVERGED = 2,
  EOS_TERMINATION_NON_FINITE = 3,
} EosTermination;

// Opaque regression dataset.
typedef struct EosDataset EosDataset;

// Opaque finished run with its classification.
typedef struct EosTrajectory EosTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string; static, never free it.
const char *eos_version(void);

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *eos_last_error(void);

// Single sample `(x, y)` with reference vector `beta_star` (may be null for zeros).
//
// # Safety
// `x` must point to `d` doubles, `beta_star` to `d` doubles or be null, and `out` must be writable.
enum EosStatus eos_dataset_single(const double *x,
                                  size_t d,
                                  double y,
                                  const double *beta_star,
                                  struct EosDataset **out);

// The two-coordinate input `x = (1, x2)` with target `mu`.
//
// # Safety
// `out` must be writable.
enum EosStatus eos_dataset_two_dim(double x2, double mu, struct EosDataset **out);

// `n` Gaussian samples in dimension `d` labelled by a seeded `k`-sparse vector.
//
// # Safety
// `out` must be writable.
enum EosStatus eos_dataset_generate(size_t d,
                                    size_t n,
                                    size_t k,
                                    uint64_t seed,
                                    struct EosDataset **out);

// # Safety
// `data` must be null or a handle from this library that has not been freed.
void eos_dataset_free(struct EosDataset *data);

// # Safety
// `data` must be a live handle; `d` and `n` must be writable.
enum EosStatus eos_dataset_shape(const struct EosDataset *data, size_t *d, size_t *n);

// Largest Hessian eigenvalue of the loss at `(w_plus, w_minus)`.
//
// # Safety
// `data` must be a live handle, `w_plus` and `w_minus` must point to `d` doubles, `out` must be writable.
enum EosStatus eos_sharpness(const struct EosDataset *data,
                             const double *w_plus,
                             const double *w_minus,
                             size_t d,
                             double *out);

// Gradient descent from `w_plus = w_minus = alpha` with step `eta`, classified on completion.
// `max_steps = 0` keeps the library default.
//
// # Safety
// `data` must be a live handle and `out` writable.
enum EosStatus eos_run(const struct EosDataset *data,
                       double eta,
                       double alpha,
                       size_t max_steps,
                       struct EosTrajectory **out);

// # Safety
// `traj` must be null or a live handle.
void eos_trajectory_free(struct EosTrajectory *traj);

// Number of recorded steps (including the initial point).
//
// # Safety
// `traj` must be a live handle and `len` writable.
enum EosStatus eos_trajectory_len(const struct EosTrajectory *traj, size_t *len);

// Residual series of one sample. Pass `cap = 0` to query the length through `written`.
//
// # Safety
// `traj` must be a live handle, `buf` must hold `cap` doubles, `written` must be writable.
enum EosStatus eos_trajectory_residuals(const struct EosTrajectory *traj,
                                        size_t sample,
                                        double *buf,
                                        size_t cap,
                                        size_t *written);

// Sharpness per step; NaN where it was not recorded.
//
// # Safety
// As for [`eos_trajectory_residuals`].
enum EosStatus eos_trajectory_sharpness(const struct EosTrajectory *traj,
                                        double *buf,
                                        size_t cap,
                                        size_t *written);

// Regime label; `period` receives the period for `Periodic` and 0 otherwise.
//
// # Safety
// `traj` must be a live handle; `regime` and `period` writable.
enum EosStatus eos_trajectory_regime(const struct EosTrajectory *traj,
                                     enum EosRegime *regime,
                                     size_t *period);

// # Safety
// `traj` must be a live handle and `out` writable.
enum EosStatus eos_trajectory_termination(const struct EosTrajectory *traj,
                                          enum EosTermination *out);

// Distance of the limit to the reference vector; `NotAvailable` unless the run converged.
//
// # Safety
// `traj` must be a live handle and `out` writable.
enum EosStatus eos_trajectory_error_norm(const struct EosTrajectory *traj, double *out);

// Closed-form 2-cycle `[(r1, s1), (r2, s2)]` of the reduced map.
// `real` is 1 when the cycle is real; the points are NaN otherwise.
//
// # Safety
// `points` must hold 4 doubles and `real` must be writable.
enum EosStatus eos_two_cycle(double mu, double eta, double x, double *points, int32_t *real);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EOS_LAB_H */
