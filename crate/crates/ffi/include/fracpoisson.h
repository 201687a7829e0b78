#ifndef FRACPOISSON_H
#define FRACPOISSON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_DOMAIN = 1,
  FP_STATUS_RANGE = 2,
  FP_STATUS_PRECONDITION = 3,
  FP_STATUS_CONFIG = 4,
  FP_STATUS_NON_CONVERGENCE = 5,
  FP_STATUS_TRUNCATION = 6,
  FP_STATUS_NULL_POINTER = 7,
  FP_STATUS_INVALID_STRING = 8,
  FP_STATUS_PANIC = 9,
} FpStatus;

/**
 * Opaque model handle.
 */
typedef struct FpModel FpModel;

/**
 * Opaque sampler handle owning its random stream.
 */
typedef struct FpSampler FpSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *fp_last_error_message(void);

/**
 * `E_{alpha,beta}(z)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FpStatus fp_mittag_leffler(double alpha, double beta, double z, double *out);

/**
 * `log E^gamma_{alpha,beta}(z)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FpStatus fp_log_generalized_mittag_leffler(double alpha,
                                                double beta,
                                                double gamma,
                                                double z,
                                                double *out);

/**
 * Creates a model with order `nu` and `m` intensities.
 *
 * # Safety
 * `lambda` must point to `m` doubles and `out` must be valid for writes.
 */
enum FpStatus fp_model_new(double nu, const double *lambda, size_t m, struct FpModel **out);

/**
 * Releases a model; NULL is ignored.
 *
 * # Safety
 * `model` must come from [`fp_model_new`] and not have been freed.
 */
void fp_model_free(struct FpModel *model);

/**
 * Dimension `m` of the model, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t fp_model_dim(const struct FpModel *model);

/**
 * `log P(s(M(t)) = h)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum FpStatus fp_marginal_sum_log_pmf(const struct FpModel *model,
                                      double t,
                                      uint64_t h,
                                      double *out);

/**
 * `log P(M(t) = k)`.
 *
 * # Safety
 * `k` must point to `m` integers; `model` must be live; `out` writable.
 */
enum FpStatus fp_joint_log_pmf(const struct FpModel *model,
                               double t,
                               const uint64_t *k,
                               size_t m,
                               double *out);

/**
 * `log E[exp(<theta, M(t)>)]`.
 *
 * # Safety
 * `theta` must point to `m` doubles; `model` must be live; `out` writable.
 */
enum FpStatus fp_log_mgf(const struct FpModel *model,
                         double t,
                         const double *theta,
                         size_t m,
                         double *out);

/**
 * Writes `E[M(t)]` into `out[0..m]`.
 *
 * # Safety
 * `out` must point to `m` writable doubles; `model` must be live.
 */
enum FpStatus fp_mean_vector(const struct FpModel *model, double t, double *out, size_t m);

/**
 * Writes the limiting covariance `C` row-major into `out[0..len]`, `len = m*m`.
 *
 * # Safety
 * `out` must point to `len` writable doubles; `model` must be live.
 */
enum FpStatus fp_covariance_matrix(const struct FpModel *model, double *out, size_t len);

/**
 * `Lambda*(x)`; `+INFINITY` outside the orthant.
 *
 * # Safety
 * `x` must point to `m` doubles; `model` must be live; `out` writable.
 */
enum FpStatus fp_rate_ld(const struct FpModel *model, const double *x, size_t m, double *out);

/**
 * `<x, C^-1 x>/2`.
 *
 * # Safety
 * `x` must point to `m` doubles; `model` must be live; `out` writable.
 */
enum FpStatus fp_rate_md(const struct FpModel *model, const double *x, size_t m, double *out);

/**
 * Estimate of `nu` from the total `sum` observed at time `t`; `+INFINITY`
 * for a zero total. Uses the intensities of `model` only.
 *
 * # Safety
 * `model` must be live; `out` writable.
 */
enum FpStatus fp_estimate_nu(const struct FpModel *model, double t, uint64_t sum, double *out);

/**
 * `J_{nu}(nu_hat)` with `nu` taken from the model; `nu_hat` may be infinite.
 *
 * # Safety
 * `model` must be live; `out` writable.
 */
enum FpStatus fp_rate_j(const struct FpModel *model, double nu_hat, double *out);

/**
 * Sampler for `M(t)` on the stream `(seed, 0, 0)`.
 *
 * # Safety
 * `model` must be live; `out` writable.
 */
enum FpStatus fp_sampler_new(const struct FpModel *model,
                             double t,
                             uint64_t seed,
                             struct FpSampler **out);

/**
 * Releases a sampler; NULL is ignored.
 *
 * # Safety
 * `sampler` must come from [`fp_sampler_new`] and not have been freed.
 */
void fp_sampler_free(struct FpSampler *sampler);

/**
 * Writes the next draw into `counts[0..m]`.
 *
 * # Safety
 * `sampler` must be live and `counts` must point to `m` writable integers.
 */
enum FpStatus fp_sampler_next(struct FpSampler *sampler, uint64_t *counts, size_t m);

/**
 * Runs an experiment from its JSON config and returns the JSON report in
 * `*out`, to be released with [`fp_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` writable.
 */
enum FpStatus fp_run_experiment_json(const char *config_json, char **out);

/**
 * Releases a string returned by this library; NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void fp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACPOISSON_H */
