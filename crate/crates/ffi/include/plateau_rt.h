#ifndef PLATEAU_RT_H
#define PLATEAU_RT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PlateauStatus {
  PLATEAU_STATUS_OK = 0,
  PLATEAU_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A size limit was exceeded (for example an oracle state count).
   */
  PLATEAU_STATUS_CAPACITY = 2,
  /**
   * The value does not fit in a double; `log2_value` is still valid.
   */
  PLATEAU_STATUS_OVERFLOW = 3,
  PLATEAU_STATUS_NULL_POINTER = 4,
  PLATEAU_STATUS_INTERNAL = 5,
  /**
   * Some simulation trials hit the iteration cap; the report is still returned.
   */
  PLATEAU_STATUS_CAPPED = 6,
} PlateauStatus;

typedef enum PlateauMethod {
  PLATEAU_METHOD_EXACT_FOURIER = 0,
  PLATEAU_METHOD_ASYMPTOTIC = 1,
  PLATEAU_METHOD_ORACLE = 2,
  PLATEAU_METHOD_MONTE_CARLO = 3,
} PlateauMethod;

typedef enum PlateauProblem {
  PLATEAU_PROBLEM_NEEDLE = 0,
  PLATEAU_PROBLEM_BLOCK_LEADING_ONES = 1,
} PlateauProblem;

/**
 * Opaque simulation report.
 */
typedef struct PlateauReport PlateauReport;

/**
 * Opaque mutation schedule.
 */
typedef struct PlateauSchedule PlateauSchedule;

/**
 * An expected iteration count.
 */
typedef struct PlateauEstimate {
  /**
   * `+inf` when `overflow` is set.
   */
  double value;
  double log2_value;
  /**
   * Standard error of a Monte Carlo estimate, NaN otherwise.
   */
  double std_error;
  enum PlateauMethod method;
  bool overflow;
} PlateauEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *plateau_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns its full length in bytes,
 * excluding the NUL. Returns 0 when there is no error.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t plateau_last_error(char *buf, size_t len);

/**
 * Expected iterations to reach `1^ell` from a uniform start, or from a
 * uniform non-optimal start when `exclude_optimum` is set.
 *
 * # Safety
 * `out` must point to a writable `PlateauEstimate`.
 */
enum PlateauStatus plateau_needle_time(size_t ell,
                                       double p,
                                       bool exclude_optimum,
                                       struct PlateauEstimate *out);

/**
 * A schedule using rate `p` at every fitness level.
 *
 * # Safety
 * `out` must point to writable storage for a handle.
 */
enum PlateauStatus plateau_schedule_static(double p, struct PlateauSchedule **out);

/**
 * A schedule with one rate per fitness level `0..len`.
 *
 * # Safety
 * `rates` must point to `len` readable doubles; `out` to writable handle storage.
 */
enum PlateauStatus plateau_schedule_table(const double *rates,
                                          size_t len,
                                          struct PlateauSchedule **out);

/**
 * The per-level numerically optimal schedule.
 *
 * # Safety
 * `out` must point to writable storage for a handle.
 */
enum PlateauStatus plateau_schedule_adaptive(struct PlateauSchedule **out);

/**
 * Releases a schedule. NULL is ignored.
 *
 * # Safety
 * `sched` must be NULL or a handle from a `plateau_schedule_*` constructor, not yet freed.
 */
void plateau_schedule_free(struct PlateauSchedule *sched);

/**
 * Exact expected optimization time on BlockLeadingOnes with `n/ell` blocks.
 *
 * # Safety
 * `sched` must be a live schedule handle and `out` a writable `PlateauEstimate`.
 */
enum PlateauStatus plateau_blo_total_time(size_t n,
                                          size_t ell,
                                          const struct PlateauSchedule *sched,
                                          struct PlateauEstimate *out);

/**
 * The numerically optimal rate at fitness level `m`; `boundary` reports
 * whether it sits at the edge of the search interval.
 *
 * # Safety
 * `rate` and `boundary` must be writable.
 */
enum PlateauStatus plateau_optimal_adaptive_rate(size_t m,
                                                 size_t ell,
                                                 double *rate,
                                                 bool *boundary);

/**
 * The constants λ and α of the optimal static rate λ/n.
 *
 * # Safety
 * `lambda` and `alpha` must be writable.
 */
enum PlateauStatus plateau_static_optimum(double *lambda, double *alpha);

/**
 * Runs `trials` seeded trials of the (1+1) EA. For `Needle`, `n` is ignored
 * and set to `ell`. A `cap` of 0 selects the default iteration cap.
 *
 * On `Ok` and `Capped` a report handle is written to `out`.
 *
 * # Safety
 * `sched` must be a live schedule handle and `out` writable handle storage.
 */
enum PlateauStatus plateau_simulate(enum PlateauProblem problem,
                                    size_t n,
                                    size_t ell,
                                    const struct PlateauSchedule *sched,
                                    size_t trials,
                                    uint64_t seed,
                                    uint64_t cap,
                                    struct PlateauReport **out);

/**
 * Sample mean and standard error over completed trials.
 *
 * # Safety
 * `report` must be a live report handle and `out` a writable `PlateauEstimate`.
 */
enum PlateauStatus plateau_report_estimate(const struct PlateauReport *report,
                                           struct PlateauEstimate *out);

/**
 * Number of trials that reached the optimum; 0 for a NULL handle.
 *
 * # Safety
 * `report` must be NULL or a live report handle.
 */
size_t plateau_report_trials_completed(const struct PlateauReport *report);

/**
 * Number of trials stopped by the iteration cap; 0 for a NULL handle.
 *
 * # Safety
 * `report` must be NULL or a live report handle.
 */
size_t plateau_report_capped_trials(const struct PlateauReport *report);

/**
 * Copies up to `len` per-trial iteration counts into `buf` in trial order and
 * writes the total number of trials to `total`. Capped trials report the cap.
 *
 * # Safety
 * `report` must be a live report handle, `buf` NULL or `len` writable
 * `uint64_t`s, and `total` writable.
 */
enum PlateauStatus plateau_report_iterations(const struct PlateauReport *report,
                                             uint64_t *buf,
                                             size_t len,
                                             size_t *total);

/**
 * Releases a report. NULL is ignored.
 *
 * # Safety
 * `report` must be NULL or a handle from [`plateau_simulate`], not yet freed.
 */
void plateau_report_free(struct PlateauReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLATEAU_RT_H */
