#ifndef PSITEST_H
#define PSITEST_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsitestStatus {
  PSITEST_STATUS_OK = 0,
  PSITEST_STATUS_NULL_POINTER = 1,
  PSITEST_STATUS_DOMAIN = 2,
  PSITEST_STATUS_DIM_MISMATCH = 3,
  PSITEST_STATUS_NO_CLICKS = 4,
  PSITEST_STATUS_ZERO_CLICK_PROBABILITY = 5,
  PSITEST_STATUS_PARSE = 6,
  PSITEST_STATUS_CONFIG = 7,
  PSITEST_STATUS_IO = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  PSITEST_STATUS_INTERNAL = 9,
} PsitestStatus;

/**
 * Opaque click-count table.
 */
typedef struct PsitestCounts PsitestCounts;

/**
 * Opaque Monte Carlo distance distribution.
 */
typedef struct PsitestDistribution PsitestDistribution;

typedef struct PsitestNoiseParams {
  /**
   * Hz.
   */
  double dark_rate;
  double dark_rate_err;
  /**
   * Seconds.
   */
  double keep_window;
  /**
   * Click probability per train, `eta <n>`.
   */
  double detection_probability;
  double detection_probability_rel_err;
  double extinction_db;
  double extinction_db_err;
} PsitestNoiseParams;

typedef struct PsitestBand {
  double central;
  double low;
  double high;
} PsitestBand;

typedef struct PsitestApparatus {
  size_t dim;
  double mean_photons;
  double efficiency;
  /**
   * Hz.
   */
  double dark_rate;
  /**
   * Seconds.
   */
  double keep_window;
  /**
   * Seconds.
   */
  double bin_period;
  /**
   * Linear power leakage into a blocked bin.
   */
  double extinction_power_ratio;
} PsitestApparatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null.
 */
const char *psitest_status_message(enum PsitestStatus status);

/**
 * Message for the last failure on this thread, or null if the last call
 * succeeded. Valid until the next call into this library on the thread.
 */
const char *psitest_last_error_message(void);

/**
 * Vacuum-projected distance between a missing-bin train and the reference.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum PsitestStatus psitest_delta0_closed_form(size_t d, double mean_photons, double *out);

/**
 * Leading-order mean distance under phase noise; `out_within_validity`
 * reports whether `d * step_variance < 1`.
 *
 * # Safety
 * Out pointers must be null or valid for writes.
 */
enum PsitestStatus psitest_analytic_expected_delta(size_t d,
                                                   double mean_photons,
                                                   double step_variance,
                                                   double *out_value,
                                                   bool *out_within_validity);

/**
 * Fraction of clicking trains that carried exactly one photon.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum PsitestStatus psitest_single_photon_fraction(double mean_photons, double *out);

/**
 * Nominal noise parameters.
 */
struct PsitestNoiseParams psitest_noise_params_nominal(void);

/**
 * Expected `epsilon_expt` at dimension `d` and its uncertainty band.
 *
 * # Safety
 * `params` must be null or point to a valid struct; `out` must be null or
 * valid for writes.
 */
enum PsitestStatus psitest_expected_epsilon(const struct PsitestNoiseParams *params,
                                            size_t d,
                                            struct PsitestBand *out);

/**
 * Samples the distance distribution under phase noise. `coherence_time`
 * may be infinite for a noiseless laser. Release with
 * [`psitest_distribution_free`].
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum PsitestStatus psitest_distribution_new(double coherence_time,
                                            double bin_spacing,
                                            size_t d,
                                            double mean_photons,
                                            size_t samples_per_k,
                                            uint64_t seed,
                                            struct PsitestDistribution **out);

/**
 * # Safety
 * `dist` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_distribution_len(const struct PsitestDistribution *dist, size_t *out);

/**
 * # Safety
 * `dist` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_distribution_mean(const struct PsitestDistribution *dist, double *out);

/**
 * Type-7 empirical quantile for `q` in (0, 1).
 *
 * # Safety
 * `dist` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_distribution_quantile(const struct PsitestDistribution *dist,
                                                 double q,
                                                 double *out);

/**
 * # Safety
 * `dist` must be null or a handle from [`psitest_distribution_new`] not yet freed.
 */
void psitest_distribution_free(struct PsitestDistribution *dist);

/**
 * Nominal apparatus at dimension `d`.
 */
struct PsitestApparatus psitest_apparatus_nominal(size_t d);

/**
 * Simulates `trials_per_k` trains per prepared bin. Release with
 * [`psitest_counts_free`].
 *
 * # Safety
 * `config` must be null or valid; `out` null or valid for writes.
 */
enum PsitestStatus psitest_run_experiment(const struct PsitestApparatus *config,
                                          uint64_t trials_per_k,
                                          uint64_t seed,
                                          struct PsitestCounts **out);

/**
 * # Safety
 * `counts` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_counts_dim(const struct PsitestCounts *counts, size_t *out);

/**
 * Clicks in bin `j` when bin `k` was blocked (both zero-based).
 *
 * # Safety
 * `counts` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_counts_get(const struct PsitestCounts *counts,
                                      size_t k,
                                      size_t j,
                                      uint64_t *out);

/**
 * Trains without any click when bin `k` was blocked.
 *
 * # Safety
 * `counts` must be a live handle or null; `out` null or valid for writes.
 */
enum PsitestStatus psitest_counts_no_clicks(const struct PsitestCounts *counts,
                                            size_t k,
                                            uint64_t *out);

/**
 * `epsilon_expt` and its binomial standard error.
 *
 * # Safety
 * `counts` must be a live handle or null; out pointers null or valid for writes.
 */
enum PsitestStatus psitest_counts_epsilon(const struct PsitestCounts *counts,
                                          double *out_value,
                                          double *out_std_error);

/**
 * # Safety
 * `counts` must be null or a handle from [`psitest_run_experiment`] not yet freed.
 */
void psitest_counts_free(struct PsitestCounts *counts);

/**
 * Checks both overlap bounds on `models` random model pairs. `out_passed`
 * is true iff no model violates either bound.
 *
 * # Safety
 * `out_passed` must be null or valid for writes.
 */
enum PsitestStatus psitest_verify_nogo(size_t models, uint64_t seed, bool *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSITEST_H */
