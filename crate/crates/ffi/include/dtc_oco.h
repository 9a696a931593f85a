#ifndef DTC_OCO_H
#define DTC_OCO_H

/* Generated by cbindgen from the dtc-oco-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtcOcoMode {
  DTC_OCO_MODE_DOUBLE = 0,
  DTC_OCO_MODE_ONLY_DELAYED_ANCHOR = 1,
  DTC_OCO_MODE_ONLY_PREVIOUS_ANCHOR = 2,
} DtcOcoMode;

typedef enum DtcOcoPolicy {
  DTC_OCO_POLICY_KNOWN_DELTA = 0,
  DTC_OCO_POLICY_UNKNOWN_DELTA = 1,
  DTC_OCO_POLICY_UNKNOWN_TAU_KNOWN_DELTA = 2,
  DTC_OCO_POLICY_UNKNOWN_TAU_UNKNOWN_DELTA = 3,
  DTC_OCO_POLICY_TIME_INVARIANT = 4,
} DtcOcoPolicy;

typedef enum DtcOcoStatus {
  DTC_OCO_STATUS_OK = 0,
  DTC_OCO_STATUS_NULL_POINTER = 1,
  DTC_OCO_STATUS_INVALID_ARGUMENT = 2,
  DTC_OCO_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Calls out of order, e.g. two decisions without feedback in between.
   */
  DTC_OCO_STATUS_OUT_OF_ORDER = 4,
  DTC_OCO_STATUS_INTERNAL = 5,
  DTC_OCO_STATUS_PANIC = 6,
} DtcOcoStatus;

/**
 * Opaque solver handle.
 */
typedef struct DtcOcoSolver DtcOcoSolver;

typedef struct DtcOcoStepSizes {
  double alpha;
  double eta;
  double gamma;
} DtcOcoStepSizes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dtc_oco_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dtc_oco_last_error(void);

/**
 * Step sizes from a policy. `delta` is ignored by policies without it.
 *
 * # Safety
 * `out` must be null or point to a writable `DtcOcoStepSizes`.
 */
enum DtcOcoStatus dtc_oco_pick_step_sizes(enum DtcOcoPolicy policy,
                                          double delta,
                                          size_t horizon,
                                          size_t tau,
                                          double beta,
                                          struct DtcOcoStepSizes *out);

/**
 * Create a solver over the box `[lower, upper]` (length `dim`) with
 * `constraint_count` long-term constraints and feedback delay `tau ≥ 1`.
 * `x_init` may be null for the box midpoint.
 *
 * # Safety
 * `lower`, `upper` and a non-null `x_init` must point to `dim` readable
 * `f64`s; `out` must point to a writable handle slot.
 */
enum DtcOcoStatus dtc_oco_solver_create(size_t dim,
                                        const double *lower,
                                        const double *upper,
                                        size_t constraint_count,
                                        size_t tau,
                                        struct DtcOcoStepSizes sizes,
                                        enum DtcOcoMode mode,
                                        const double *x_init,
                                        struct DtcOcoSolver **out);

/**
 * Decide the next slot and write `x_t` to `out_x` (length `dim`). The
 * previous slot's feedback must have been given.
 *
 * # Safety
 * `solver` must come from `dtc_oco_solver_create`; `out_x` must point to
 * `dim` writable `f64`s.
 */
enum DtcOcoStatus dtc_oco_solver_decide(struct DtcOcoSolver *solver, double *out_x, size_t dim);

/**
 * Feedback for the last decided slot: the loss gradient at `x_t` (length
 * `dim`) and `g_t(x) = A x + b` with `A` row-major
 * `constraint_count × dim` and `b` of length `constraint_count`.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths.
 */
enum DtcOcoStatus dtc_oco_solver_feedback(struct DtcOcoSolver *solver,
                                          const double *gradient,
                                          size_t dim,
                                          const double *matrix,
                                          const double *offset,
                                          size_t constraint_count);

/**
 * Copy the virtual queue `Q_t` (length `constraint_count`) to `out`.
 *
 * # Safety
 * `solver` must be a live handle; `out` must point to `len` writable `f64`s.
 */
enum DtcOcoStatus dtc_oco_solver_queue(const struct DtcOcoSolver *solver, double *out, size_t len);

/**
 * Number of slots decided so far, or 0 for a null handle.
 *
 * # Safety
 * `solver` must be null or a live handle.
 */
size_t dtc_oco_solver_slot(const struct DtcOcoSolver *solver);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `solver` must be null or a handle not yet freed.
 */
void dtc_oco_solver_free(struct DtcOcoSolver *solver);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTC_OCO_H */
