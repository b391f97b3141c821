#ifndef POISSON_LAB_H
#define POISSON_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_INVALID_ARGUMENT = 1,
  PL_STATUS_POLICY_VIOLATION = 2,
  PL_STATUS_RUNAWAY_INTENSITY = 3,
  PL_STATUS_NULL_POINTER = 4,
  /**
   * No closed form exists for the requested quantity.
   */
  PL_STATUS_NOT_AVAILABLE = 5,
  PL_STATUS_INTERNAL = 6,
} PlStatus;

/**
 * Values accepted in `PlSchemeSpec::kind`.
 */
enum PlSchemeKind
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  PL_SCHEME_KIND_BINARY_ZERO_DARK = 0,
  PL_SCHEME_KIND_BINARY_DARK_WINDOW = 1,
  PL_SCHEME_KIND_MARY_ZERO_DARK = 2,
  PL_SCHEME_KIND_MARY_DARK_WINDOW = 3,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum PlSchemeKind PlSchemeKind;
#else
typedef uint32_t PlSchemeKind;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque scheme handle.
 */
typedef struct PlScheme PlScheme;

typedef struct PlSchemeSpec {
  /**
   * One of `PlSchemeKind`.
   */
  uint32_t kind;
  size_t messages;
  double power;
  /**
   * Signaling horizon `T`, or the window `delta` for the dark-current kinds.
   */
  double horizon;
  double dark_current;
} PlSchemeSpec;

typedef struct PlTrial {
  double energy;
  uint64_t n_events;
  /**
   * NaN when there was no count.
   */
  double first_event;
  size_t decoded;
  bool correct;
} PlTrial;

typedef struct PlEstimate {
  uint64_t n;
  double mean;
  double std_error;
  double ci_low;
  double ci_high;
} PlEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Validate `spec` and create a scheme handle in `*out`.
 *
 * # Safety
 * `spec` must point to a valid `PlSchemeSpec` and `out` to writable storage
 * for one pointer.
 */
enum PlStatus pl_scheme_new(const struct PlSchemeSpec *spec, struct PlScheme **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `scheme` must be null or a handle from [`pl_scheme_new`] not yet freed.
 */
void pl_scheme_free(struct PlScheme *scheme);

/**
 * Simulate trial `trial` of `message` under `seed`. The same arguments always
 * give the same result.
 *
 * # Safety
 * `scheme` must be a live handle and `out` writable.
 */
enum PlStatus pl_scheme_run_trial(const struct PlScheme *scheme,
                                  size_t message,
                                  uint64_t seed,
                                  uint64_t trial,
                                  struct PlTrial *out);

/**
 * Monte Carlo error probability and energy for `message` over `n_trials`
 * trials (95% intervals). Either output may be null.
 *
 * # Safety
 * `scheme` must be a live handle; non-null outputs must be writable.
 */
enum PlStatus pl_scheme_simulate(const struct PlScheme *scheme,
                                 size_t message,
                                 uint64_t n_trials,
                                 uint64_t seed,
                                 struct PlEstimate *p_err,
                                 struct PlEstimate *energy);

/**
 * Exact message-averaged error probability and energy. Returns
 * `NotAvailable` for the M-ary kind with dark current.
 *
 * # Safety
 * `scheme` must be a live handle; non-null outputs must be writable.
 */
enum PlStatus pl_scheme_closed_form(const struct PlScheme *scheme,
                                    double *p_err_avg,
                                    double *energy_avg);

/**
 * Poisson probability of `count` events at the given mean.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlStatus pl_poisson_pmf(double mean, uint64_t count, double *out);

/**
 * Least average energy per message, `(M - 1) / M`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlStatus pl_converse_energy_bound(size_t messages, double *out);

/**
 * Wilson 95% interval for `successes` out of `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlStatus pl_estimate_bernoulli(uint64_t successes, uint64_t n, struct PlEstimate *out);

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *pl_last_error(void);

const char *pl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POISSON_LAB_H */
