#ifndef ANSFD_H
#define ANSFD_H

/* Generated by cbindgen from the ansfd-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Gain selection for coefficient construction over the C ABI.
 */
typedef enum AnsfdGainMode {
  /**
   * Exact-on-ramp closed form.
   */
  ANSFD_GAIN_MODE_CALIBRATED = 0,
  /**
   * K = 1.
   */
  ANSFD_GAIN_MODE_UNIT = 1,
  /**
   * Use the explicit `manual_k` argument.
   */
  ANSFD_GAIN_MODE_MANUAL = 2,
} AnsfdGainMode;

/**
 * Status code returned by every fallible entry point.
 */
typedef enum AnsfdStatus {
  ANSFD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ANSFD_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ANSFD_STATUS_INVALID_UTF8 = 2,
  /**
   * A numeric or structural argument was out of range.
   */
  ANSFD_STATUS_INVALID_PARAMETER = 3,
  /**
   * The problem name did not resolve.
   */
  ANSFD_STATUS_UNKNOWN_PROBLEM = 4,
  /**
   * The scheme spec string did not parse.
   */
  ANSFD_STATUS_PARSE_ERROR = 5,
  /**
   * The integration exceeded the divergence guard.
   */
  ANSFD_STATUS_DIVERGENCE = 6,
  /**
   * The sample window held too few samples.
   */
  ANSFD_STATUS_WINDOW_UNDERFLOW = 7,
  /**
   * A stability bracket did not straddle the boundary.
   */
  ANSFD_STATUS_BAD_BRACKET = 8,
  /**
   * A caller-supplied buffer was too small.
   */
  ANSFD_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * An internal panic was caught at the boundary.
   */
  ANSFD_STATUS_INTERNAL_PANIC = 10,
} AnsfdStatus;

/**
 * Opaque handle: estimator coefficients plus their sample window.
 */
typedef struct AnsfdEstimator AnsfdEstimator;

/**
 * Opaque handle: an initial-value problem from the catalog.
 */
typedef struct AnsfdProblem AnsfdProblem;

/**
 * Opaque handle: a parsed scheme spec.
 */
typedef struct AnsfdScheme AnsfdScheme;

/**
 * Opaque handle: an integration result.
 */
typedef struct AnsfdTrajectory AnsfdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message for this thread into `buf`
 * (truncating, always nul-terminated) and returns the full message
 * length in bytes, excluding the terminator. `buf` may be null to
 * query the length.
 *
 * # Safety
 * `buf` must be null or point to at least `cap` writable bytes.
 */
size_t ansfd_last_error_message(char *buf, size_t cap);

/**
 * Static name of a status code (never null).
 */
const char *ansfd_status_name(enum AnsfdStatus status);

/**
 * Resolves a catalog problem name (e.g. `dahlquist:-1`).
 *
 * # Safety
 * `name` must be a valid nul-terminated string; `out` must be a valid
 * pointer. On success `*out` owns a handle to release with
 * [`ansfd_problem_free`].
 */
enum AnsfdStatus ansfd_problem_lookup(const char *name, struct AnsfdProblem **out);

/**
 * Reseeds any noisy input nodes of the problem.
 *
 * # Safety
 * `problem` must be a live handle from [`ansfd_problem_lookup`].
 */
enum AnsfdStatus ansfd_problem_set_seed(struct AnsfdProblem *problem, uint64_t seed);

/**
 * The problem's own horizon.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be valid.
 */
enum AnsfdStatus ansfd_problem_t_final(const struct AnsfdProblem *problem, double *out);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void ansfd_problem_free(struct AnsfdProblem *problem);

/**
 * Parses a scheme spec string (see the CLI help for the grammar).
 *
 * # Safety
 * `spec` must be a valid nul-terminated string; `out` must be valid.
 * On success `*out` owns a handle to release with [`ansfd_scheme_free`].
 */
enum AnsfdStatus ansfd_scheme_parse(const char *spec, struct AnsfdScheme **out);

/**
 * # Safety
 * `scheme` must be null or a handle not yet freed.
 */
void ansfd_scheme_free(struct AnsfdScheme *scheme);

/**
 * Integrates over the problem's own horizon.
 *
 * # Safety
 * `problem` and `scheme` must be live handles; `out` must be valid. On
 * success `*out` owns a handle to release with
 * [`ansfd_trajectory_free`].
 */
enum AnsfdStatus ansfd_integrate(const struct AnsfdProblem *problem,
                                 const struct AnsfdScheme *scheme,
                                 double h,
                                 struct AnsfdTrajectory **out);

/**
 * Integrates to an explicit horizon (final step truncated to land on it).
 *
 * # Safety
 * As for [`ansfd_integrate`].
 */
enum AnsfdStatus ansfd_integrate_to(const struct AnsfdProblem *problem,
                                    const struct AnsfdScheme *scheme,
                                    double h,
                                    double t_final,
                                    struct AnsfdTrajectory **out);

/**
 * Number of samples (including the initial condition); 0 for null.
 *
 * # Safety
 * `trajectory` must be null or a live handle.
 */
size_t ansfd_trajectory_len(const struct AnsfdTrajectory *trajectory);

/**
 * State dimension; 0 for null.
 *
 * # Safety
 * `trajectory` must be null or a live handle.
 */
size_t ansfd_trajectory_dim(const struct AnsfdTrajectory *trajectory);

/**
 * Copies the time grid into `buf`.
 *
 * # Safety
 * `trajectory` must be a live handle and `buf` must point to at least
 * `cap` doubles.
 */
enum AnsfdStatus ansfd_trajectory_times(const struct AnsfdTrajectory *trajectory,
                                        double *buf,
                                        size_t cap);

/**
 * Copies one solution component across all samples into `buf`.
 *
 * # Safety
 * `trajectory` must be a live handle and `buf` must point to at least
 * `cap` doubles.
 */
enum AnsfdStatus ansfd_trajectory_component(const struct AnsfdTrajectory *trajectory,
                                            size_t component,
                                            double *buf,
                                            size_t cap);

/**
 * # Safety
 * `trajectory` must be null or a handle not yet freed.
 */
void ansfd_trajectory_free(struct AnsfdTrajectory *trajectory);

/**
 * The exact-on-ramp gain `eta^2 / (eta^2 + 2)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AnsfdStatus ansfd_calibrated_gain(size_t eta, double *out);

/**
 * Fills `buf` with the `eta + 1` window weights (oldest sample first)
 * and stores the multiplying scale in `scale_out` when non-null.
 *
 * # Safety
 * `buf` must point to at least `cap` doubles; `scale_out` must be null
 * or valid.
 */
enum AnsfdStatus ansfd_weights(size_t eta,
                               double h,
                               enum AnsfdGainMode gain_mode,
                               double manual_k,
                               double *buf,
                               size_t cap,
                               double *scale_out);

/**
 * Creates an estimator handle: coefficients for `(eta, h)` plus an
 * empty window of `eta + 1` samples.
 *
 * # Safety
 * `out` must be valid. On success `*out` owns a handle to release with
 * [`ansfd_estimator_free`].
 */
enum AnsfdStatus ansfd_estimator_new(size_t eta,
                                     double h,
                                     enum AnsfdGainMode gain_mode,
                                     double manual_k,
                                     struct AnsfdEstimator **out);

/**
 * Appends a sample, evicting the oldest once the window is full.
 *
 * # Safety
 * `estimator` must be a live handle.
 */
enum AnsfdStatus ansfd_estimator_push(struct AnsfdEstimator *estimator, double sample);

/**
 * Whether the window holds its full `eta + 1` samples.
 *
 * # Safety
 * `estimator` must be null or a live handle.
 */
bool ansfd_estimator_is_full(const struct AnsfdEstimator *estimator);

/**
 * Slope estimate at the newest sample of a full window.
 *
 * # Safety
 * `estimator` must be a live handle; `out` must be valid.
 */
enum AnsfdStatus ansfd_estimator_slope(const struct AnsfdEstimator *estimator, double *out);

/**
 * # Safety
 * `estimator` must be null or a handle not yet freed.
 */
void ansfd_estimator_free(struct AnsfdEstimator *estimator);

/**
 * Bisects the largest stable step for the scheme on `y' = lambda*y`
 * over `n_steps`-step runs, between a stable `lo` and an unstable `hi`.
 *
 * # Safety
 * `scheme` must be a live handle; `out` must be valid.
 */
enum AnsfdStatus ansfd_stability_threshold(const struct AnsfdScheme *scheme,
                                           double lambda,
                                           size_t n_steps,
                                           double lo,
                                           double hi,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANSFD_H */
