/* C ABI for spectral-mdp. Generated by cbindgen; do not edit. */

#pragma once

/* Generated with cbindgen:0.26.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Ensemble selector mirroring the core enum.
 */
enum SmdpEnsemble
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  SMDP_ENSEMBLE_GAUSSIAN = 0,
  SMDP_ENSEMBLE_LAGUERRE = 1,
  SMDP_ENSEMBLE_JACOBI = 2,
};
#ifndef __cplusplus
typedef int32_t SmdpEnsemble;
#endif // __cplusplus

/**
 * Scalar finite-n law selector for the closed-form rates.
 */
enum SmdpRateKind
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  SMDP_RATE_KIND_NORMAL_VAR = 0,
  SMDP_RATE_KIND_GAMMA_MEAN = 1,
  SMDP_RATE_KIND_BETA_HALF = 2,
};
#ifndef __cplusplus
typedef int32_t SmdpRateKind;
#endif // __cplusplus

/**
 * Reference measure selector.
 */
enum SmdpReference
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  SMDP_REFERENCE_SEMICIRCLE = 0,
  SMDP_REFERENCE_MARCHENKO_PASTUR = 1,
  SMDP_REFERENCE_ARCSINE = 2,
};
#ifndef __cplusplus
typedef int32_t SmdpReference;
#endif // __cplusplus

/**
 * Status code of every ABI call. Non-zero codes leave a message retrievable
 * via `smdp_last_error` on the same thread.
 */
enum SmdpStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  SMDP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SMDP_STATUS_NULL_ARGUMENT = 1,
  /**
   * A parameter violated its domain (dimension, shape, support, ...).
   */
  SMDP_STATUS_DOMAIN = 2,
  /**
   * Two related buffers or sequences disagree in length.
   */
  SMDP_STATUS_LENGTH_MISMATCH = 3,
  /**
   * Input is not supported on the half line (Laguerre-side decomposition).
   */
  SMDP_STATUS_NOT_HALF_LINE = 4,
  /**
   * Input is not supported on the unit interval (canonical moments).
   */
  SMDP_STATUS_NOT_UNIT_INTERVAL = 5,
  /**
   * Input is not the moment sequence of a nondegenerate measure.
   */
  SMDP_STATUS_NOT_MOMENT_SEQUENCE = 6,
  /**
   * Moment inversion beyond the conditioning guard.
   */
  SMDP_STATUS_CONDITIONING_GUARD = 7,
  /**
   * An iterative kernel (eigensolver, tail fraction) did not converge.
   */
  SMDP_STATUS_NON_CONVERGENCE = 8,
  /**
   * A floating-point computation failed.
   */
  SMDP_STATUS_NUMERIC = 9,
  /**
   * Filesystem or serialization failure.
   */
  SMDP_STATUS_IO = 10,
  /**
   * A provided buffer is smaller than the result.
   */
  SMDP_STATUS_BUFFER_TOO_SMALL = 11,
  /**
   * The library panicked; state is unchanged but the call did nothing.
   */
  SMDP_STATUS_PANIC = 12,
};
#ifndef __cplusplus
typedef int32_t SmdpStatus;
#endif // __cplusplus

/**
 * Opaque sampled spectral measure (atoms ascending, weights summing to 1).
 */
typedef struct SmdpMeasure SmdpMeasure;

/**
 * Opaque ensemble description (kind, dimension, beta, shape parameters).
 */
typedef struct SmdpSpec SmdpSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string (truncated to `cap - 1` bytes when necessary) and
 * returns the full message length in bytes, excluding the NUL. With a null
 * buffer or zero capacity nothing is written and only the length returns.
 */
size_t smdp_last_error(char *buf, size_t cap);

/**
 * Creates a Gaussian (Hermite) spec: dimension `n >= 1`, `beta > 0`.
 */
SmdpStatus smdp_spec_gaussian(size_t n, double beta, struct SmdpSpec **out);

/**
 * Creates a Laguerre (Wishart) spec: `gamma > -1`.
 */
SmdpStatus smdp_spec_laguerre(size_t n, double beta, double gamma, struct SmdpSpec **out);

/**
 * Creates a Jacobi (MANOVA) spec: `gamma, delta > -1`.
 */
SmdpStatus smdp_spec_jacobi(size_t n,
                            double beta,
                            double gamma,
                            double delta,
                            struct SmdpSpec **out);

/**
 * Frees a spec handle; null is a no-op.
 */
void smdp_spec_free(struct SmdpSpec *spec);

/**
 * Samples the spectral measure of one tridiagonal draw. Identical
 * (seed, stream) pairs reproduce the measure bit for bit.
 */
SmdpStatus smdp_sample(const struct SmdpSpec *spec,
                       uint64_t seed,
                       uint64_t stream,
                       struct SmdpMeasure **out);

/**
 * Number of atoms in a sampled measure (its matrix dimension).
 */
SmdpStatus smdp_measure_len(const struct SmdpMeasure *measure, size_t *out);

/**
 * Copies the atoms (ascending) into `buf`.
 */
SmdpStatus smdp_measure_atoms(const struct SmdpMeasure *measure, double *buf, size_t cap);

/**
 * Copies the weights (matching atom order, summing to 1) into `buf`.
 */
SmdpStatus smdp_measure_weights(const struct SmdpMeasure *measure, double *buf, size_t cap);

/**
 * Moments m_1..m_k of a sampled measure, written to `buf` (capacity `cap`).
 */
SmdpStatus smdp_measure_moments(const struct SmdpMeasure *measure,
                                size_t k,
                                double *buf,
                                size_t cap);

/**
 * Frees a measure handle; null is a no-op.
 */
void smdp_measure_free(struct SmdpMeasure *measure);

/**
 * Moments m_1..m_k of one draw, without materializing the eigensystem
 * (the counting recursion on the tridiagonal entries).
 */
SmdpStatus smdp_sample_moments(const struct SmdpSpec *spec,
                               size_t k,
                               uint64_t seed,
                               uint64_t stream,
                               double *buf,
                               size_t cap);

/**
 * Monte Carlo covariance of the rescaled moment vector over `reps`
 * replicates (streams `stream .. stream + reps`). `cov` and `se` receive
 * the k x k matrices row-major; both need capacity `k * k`.
 */
SmdpStatus smdp_estimate_covariance(const struct SmdpSpec *spec,
                                    size_t k,
                                    size_t reps,
                                    uint64_t seed,
                                    uint64_t stream,
                                    double *cov,
                                    double *se,
                                    size_t cap);

/**
 * Generalized Catalan number d_{i,j}; fails with `SMDP_STATUS_NUMERIC`
 * when the value exceeds 64 bits.
 */
SmdpStatus smdp_catalan(uint64_t i, uint64_t j, uint64_t *out);

/**
 * The k x k covariance factor D_k, row-major with zeros above the
 * diagonal (Jacobi entries include the 2^(-1/2) factor). `buf` needs
 * capacity `k * k`.
 */
SmdpStatus smdp_dk_matrix(SmdpEnsemble ensemble, size_t k, double *buf, size_t cap);

/**
 * Closed-form scalar rate: x^2/(2 alpha), alpha x^2 / 2, or 4 alpha x^2.
 */
SmdpStatus smdp_scalar_rate(SmdpRateKind kind, double alpha, double x, double *out);

/**
 * Moment-level rate (beta/4) ||D_k^{-1} m||^2 for the deviation vector
 * `m` of length `len`.
 */
SmdpStatus smdp_moment_rate(SmdpEnsemble ensemble,
                            double beta,
                            const double *m,
                            size_t len,
                            double *out);

/**
 * Measure-level rate of a polynomial density: coefficients in the
 * reference's orthonormal basis, degrees 1..=len. Equals
 * (beta/4) sum c_d^2.
 */
SmdpStatus smdp_polynomial_rate(SmdpReference reference,
                                double beta,
                                const double *coeffs,
                                size_t len,
                                double *out);

/**
 * Measure-level rate of a discrete signed measure (weights must sum to
 * zero): 0 when the measure vanishes, +infinity otherwise.
 */
SmdpStatus smdp_discrete_rate(double beta,
                              const double *atoms,
                              const double *weights,
                              size_t len,
                              double *out);

/**
 * Projection partial sum (beta/4) sum_{d<=max_k} (int p_d dmu)^2 of a
 * discrete signed measure against the reference's orthonormal basis; the
 * diverging counterpart of `smdp_discrete_rate`.
 */
SmdpStatus smdp_discrete_projection_rate(SmdpReference reference,
                                         double beta,
                                         const double *atoms,
                                         const double *weights,
                                         size_t len,
                                         size_t max_k,
                                         double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
