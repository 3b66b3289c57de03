#ifndef CONETAIL_H
#define CONETAIL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConetailStatus {
  CONETAIL_STATUS_OK = 0,
  CONETAIL_STATUS_NULL_POINTER = 1,
  CONETAIL_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed or out-of-range input.
   */
  CONETAIL_STATUS_INVALID_INPUT = 3,
  /*
   The set lies on a null-convergence cone.
   */
  CONETAIL_STATUS_NULL_CONVERGENCE = 4,
  /*
   A structural hypothesis of the requested operation fails.
   */
  CONETAIL_STATUS_HYPOTHESIS = 5,
  /*
   Other numeric failure.
   */
  CONETAIL_STATUS_NUMERIC = 6,
  CONETAIL_STATUS_PANIC = 7,
} ConetailStatus;

typedef struct ConetailMeasure ConetailMeasure;

typedef struct ConetailModel ConetailModel;

typedef struct ConetailRectSet ConetailRectSet;

typedef struct ConetailRng ConetailRng;

typedef struct ConetailSpectrum ConetailSpectrum;

/*
 Result of a Monte Carlo estimate.
 */
typedef struct ConetailEstimate {
  double p_hat;
  double stderr;
  double ci_lo;
  double ci_hi;
  uint64_t hits;
  uint64_t n_samples;
} ConetailEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty if none. Valid until the
 next failing call on the same thread.
 */
const char *conetail_last_error(void);

/*
 Library version as a static string.
 */
const char *conetail_version(void);

/*
 # Safety
 `s` must come from this library or be null.
 */
void conetail_string_free(char *s);

/*
 # Safety
 `p` must come from this library or be null; it is invalid afterwards.
 */
void conetail_measure_free(struct ConetailMeasure *p);

/*
 # Safety
 `p` must come from this library or be null; it is invalid afterwards.
 */
void conetail_rectset_free(struct ConetailRectSet *p);

/*
 # Safety
 `p` must come from this library or be null; it is invalid afterwards.
 */
void conetail_spectrum_free(struct ConetailSpectrum *p);

/*
 # Safety
 `p` must come from this library or be null; it is invalid afterwards.
 */
void conetail_model_free(struct ConetailModel *p);

/*
 # Safety
 `p` must come from this library or be null; it is invalid afterwards.
 */
void conetail_rng_free(struct ConetailRng *p);

/*
 # Safety
 `json` is a NUL-terminated string; `out` is writable.
 */
enum ConetailStatus conetail_measure_from_json(const char *json, struct ConetailMeasure **out);

/*
 # Safety
 `json` is a NUL-terminated string; `out` is writable.
 */
enum ConetailStatus conetail_rectset_from_json(const char *json, struct ConetailRectSet **out);

/*
 Rectangle `{z_j > x_j, j in S}` from 0-based `indices` and thresholds, both of length `len`.

 # Safety
 `indices` and `thresholds` point to `len` elements; `out` is writable.
 */
enum ConetailStatus conetail_rectset_new(size_t dim,
                                         const size_t *indices,
                                         const double *thresholds,
                                         size_t len,
                                         struct ConetailRectSet **out);

/*
 # Safety
 Handles are valid; `out` is writable.
 */
enum ConetailStatus conetail_measure_eval(const struct ConetailMeasure *m,
                                          const struct ConetailRectSet *a,
                                          double *out);

/*
 # Safety
 `json` is a NUL-terminated string; `out` is writable.
 */
enum ConetailStatus conetail_spectrum_from_json(const char *json, struct ConetailSpectrum **out);

/*
 Writes a newly allocated JSON string to `out`; free it with `conetail_string_free`.

 # Safety
 `s` is valid; `out` is writable.
 */
enum ConetailStatus conetail_spectrum_to_json(const struct ConetailSpectrum *s, char **out);

/*
 Dimension and `Delta` of a spectrum.

 # Safety
 `s` is valid; the outputs are writable or null.
 */
enum ConetailStatus conetail_spectrum_shape(const struct ConetailSpectrum *s,
                                            size_t *d,
                                            size_t *delta);

/*
 Spectrum of the sum of independent vectors with spectra `s1` and `s2`.

 # Safety
 Handles are valid; `out` is writable.
 */
enum ConetailStatus conetail_convolve(const struct ConetailSpectrum *s1,
                                      const struct ConetailSpectrum *s2,
                                      struct ConetailSpectrum **out);

/*
 Spectrum of the `n`-fold i.i.d. sum.

 # Safety
 `s` is valid; `out` is writable.
 */
enum ConetailStatus conetail_self_convolve(const struct ConetailSpectrum *s,
                                           size_t n,
                                           struct ConetailSpectrum **out);

/*
 `mu_i(A)/b_i^{<-}(t)`; on a null-convergence cone `*upper_bound` is set to 1 and
 `*value` carries the rate bound.

 # Safety
 Handles are valid; `value` is writable; `upper_bound` is writable or null.
 */
enum ConetailStatus conetail_tail_prob_approx(const struct ConetailSpectrum *s,
                                              const struct ConetailRectSet *a,
                                              double t,
                                              double *value,
                                              int32_t *upper_bound);

/*
 # Safety
 `json` is a NUL-terminated string; `out` is writable.
 */
enum ConetailStatus conetail_model_from_json(const char *json, struct ConetailModel **out);

/*
 # Safety
 `m` is valid; `out` is writable.
 */
enum ConetailStatus conetail_model_dim(const struct ConetailModel *m, size_t *out);

/*
 Spectrum implied by a sampler model.

 # Safety
 `m` is valid; `out` is writable.
 */
enum ConetailStatus conetail_model_spectrum(const struct ConetailModel *m,
                                            struct ConetailSpectrum **out);

/*
 A random stream; the same `(seed, stream)` gives the same draws.

 # Safety
 `out` is writable.
 */
enum ConetailStatus conetail_rng_new(uint64_t seed, uint64_t stream, struct ConetailRng **out);

/*
 One draw of the model into `out[0..len]`; `len` must equal the model dimension.
 A stream must not be used from two threads at once.

 # Safety
 Handles are valid; `out` points to `len` writable doubles.
 */
enum ConetailStatus conetail_sample_vector(const struct ConetailModel *m,
                                           struct ConetailRng *rng,
                                           double *out,
                                           size_t len);

/*
 Crude Monte Carlo estimate of `P(X in tA)`. `kind` is `"vector"`, `"sum:N"` or `"cp:LAMBDA:S"`.

 # Safety
 Handles and `kind` are valid; `out` is writable.
 */
enum ConetailStatus conetail_estimate_tail_prob(const char *kind,
                                                const struct ConetailModel *m,
                                                const struct ConetailRectSet *a,
                                                double t,
                                                uint64_t n_samples,
                                                uint64_t seed,
                                                struct ConetailEstimate *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CONETAIL_H */
