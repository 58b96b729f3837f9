#ifndef IRKA_LAB_H
#define IRKA_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrkaStatus {
  IRKA_STATUS_OK = 0,
  IRKA_STATUS_NULL_POINTER = 1,
  IRKA_STATUS_INVALID_INPUT = 2,
  IRKA_STATUS_SINGULAR_SHIFT = 3,
  IRKA_STATUS_UNSTABLE = 4,
  IRKA_STATUS_NOT_SSS = 5,
  IRKA_STATUS_NUMERICAL = 6,
  IRKA_STATUS_NOT_A_FIXED_POINT = 7,
  IRKA_STATUS_PARSE = 8,
  IRKA_STATUS_PANIC = 9,
} IrkaStatus;

typedef enum IrkaInit {
  IRKA_INIT_LOGSPACE = 0,
  IRKA_INIT_RANDOM = 1,
} IrkaInit;

typedef enum IrkaVerdict {
  IRKA_VERDICT_ATTRACTIVE_LOCAL_MIN = 0,
  IRKA_VERDICT_REPELLENT_OR_SADDLE = 1,
  IRKA_VERDICT_INDETERMINATE = 2,
} IrkaVerdict;

/**
 * Opaque result of one IRKA reduction.
 */
typedef struct IrkaRun IrkaRun;

/**
 * Opaque state-space system.
 */
typedef struct IrkaSystem IrkaSystem;

typedef struct IrkaRunOptions {
  size_t r;
  double tol;
  size_t max_sweeps;
  enum IrkaInit init;
  uint64_t seed;
  /**
   * Certify converged SSS runs.
   */
  bool certify;
} IrkaRunOptions;

typedef struct IrkaCertificateSummary {
  enum IrkaVerdict verdict;
  double spectral_radius;
  double fd_jacobian_maxdiff;
  bool e_positive;
  bool s_tilde_positive;
  bool neg_phi_positive;
} IrkaCertificateSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. Valid until the next
 * failing call on the same thread.
 */
const char *irka_last_error_message(void);

/**
 * Builds a system from a row-major `n x n` matrix and length-`n` vectors.
 *
 * # Safety
 * `a` must point to `n * n` doubles, `b` and `c` to `n` doubles, `out` to writable storage.
 */
enum IrkaStatus irka_system_new(size_t n,
                                const double *a,
                                const double *b,
                                const double *c,
                                struct IrkaSystem **out);

/**
 * Parses a system file (state-space or pole-residue layout).
 *
 * # Safety
 * `json` must be a NUL-terminated string, `out` writable.
 */
enum IrkaStatus irka_system_from_json(const char *json, struct IrkaSystem **out);

/**
 * # Safety
 * `sys` must come from this library and not be used afterwards. Null is ignored.
 */
void irka_system_free(struct IrkaSystem *sys);

/**
 * Order `n`, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t irka_system_order(const struct IrkaSystem *sys);

/**
 * # Safety
 * `sys` must be null or a live handle.
 */
bool irka_system_is_sss(const struct IrkaSystem *sys);

/**
 * `H^(order)(s)` for `order` in 0..=2.
 *
 * # Safety
 * `sys` live; `out_re`, `out_im` writable.
 */
enum IrkaStatus irka_eval_transfer(const struct IrkaSystem *sys,
                                   double s_re,
                                   double s_im,
                                   uint32_t order,
                                   double *out_re,
                                   double *out_im);

/**
 * # Safety
 * `sys` live; `out` writable.
 */
enum IrkaStatus irka_h2_norm(const struct IrkaSystem *sys, double *out);

/**
 * Defaults: `tol = 1e-10`, `max_sweeps = 200`, logspace start, seed 0, certification on.
 */
struct IrkaRunOptions irka_run_options_default(size_t r);

/**
 * Runs IRKA. Exhausting `max_sweeps` still returns `IRKA_STATUS_OK`; query
 * [`irka_run_converged`].
 *
 * # Safety
 * `sys` live, `opts` readable, `out` writable.
 */
enum IrkaStatus irka_run(const struct IrkaSystem *sys,
                         const struct IrkaRunOptions *opts,
                         struct IrkaRun **out);

/**
 * # Safety
 * `run` must come from [`irka_run`] and not be used afterwards. Null is ignored.
 */
void irka_run_free(struct IrkaRun *run);

/**
 * # Safety
 * `run` must be null or live.
 */
bool irka_run_converged(const struct IrkaRun *run);

/**
 * # Safety
 * `run` must be null or live.
 */
size_t irka_run_sweeps(const struct IrkaRun *run);

/**
 * Reduced order `r`, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or live.
 */
size_t irka_run_order(const struct IrkaRun *run);

/**
 * Copies the final shifts (canonical order) into `re[0..len]`, `im[0..len]`; `len` must be `r`.
 *
 * # Safety
 * `run` live; `re` and `im` writable for `len` doubles.
 */
enum IrkaStatus irka_run_shifts(const struct IrkaRun *run, double *re, double *im, size_t len);

/**
 * New handle holding a copy of the final reduced model.
 *
 * # Safety
 * `run` live; `out` writable.
 */
enum IrkaStatus irka_run_reduced_system(const struct IrkaRun *run, struct IrkaSystem **out);

/**
 * Relative H2 error `||H - H_r|| / ||H||`.
 *
 * # Safety
 * `run` live; `out` writable.
 */
enum IrkaStatus irka_run_relative_h2_error(const struct IrkaRun *run, double *out);

/**
 * Fills `out` when the run carries a certificate; `IRKA_STATUS_NOT_SSS` otherwise.
 *
 * # Safety
 * `run` live; `out` writable.
 */
enum IrkaStatus irka_run_certificate(const struct IrkaRun *run, struct IrkaCertificateSummary *out);

/**
 * Full JSON run report; release with [`irka_string_free`]. Null on failure.
 *
 * # Safety
 * `run` must be null or live.
 */
char *irka_run_report_json(const struct IrkaRun *run);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void irka_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRKA_LAB_H */
