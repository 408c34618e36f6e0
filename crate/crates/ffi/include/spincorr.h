#ifndef SPINCORR_H
#define SPINCORR_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SpcStatus {
  SPC_STATUS_OK = 0,
  SPC_STATUS_NULL_POINTER = 1,
  SPC_STATUS_VALIDATION = 2,
  SPC_STATUS_INSUFFICIENT_DATA = 3,
  SPC_STATUS_CONFIG = 4,
  SPC_STATUS_EVALUATION = 5,
  SPC_STATUS_PARSE = 6,
  SPC_STATUS_DATA = 7,
  SPC_STATUS_IO = 8,
  SPC_STATUS_PANIC = 9,
} SpcStatus;

typedef enum SpcModel {
  SPC_MODEL_QM_SINGLET_HALF = 0,
  SPC_MODEL_LHV_LINEAR = 1,
  SPC_MODEL_CONSERVATION_EXTREMAL = 2,
  SPC_MODEL_CONSERVATION_ADJACENT = 3,
} SpcModel;

/**
 * Opaque accumulator handle.
 */
typedef struct SpcAccumulator SpcAccumulator;

/**
 * Opaque simulator handle.
 */
typedef struct SpcSimulator SpcSimulator;

/**
 * One joint measurement with planar settings.
 */
typedef struct SpcEvent {
  uint64_t seq;
  double theta_a;
  double theta_b;
  int32_t two_m_a;
  int32_t two_m_b;
} SpcEvent;

typedef struct SpcEstimate {
  double value;
  double se;
  double normalized;
  double normalized_se;
  uint64_t n;
} SpcEstimate;

/**
 * Residual for one group; `defined` is false for an empty group and the
 * numeric fields are then NaN.
 */
typedef struct SpcGroupResidual {
  int32_t two_m_a;
  uint64_t n;
  bool defined;
  double residual;
  double se;
  double normalized_residual;
  double normalized_se;
} SpcGroupResidual;

/**
 * Correlation callback: relative angle in `[0, π]` and the user pointer.
 */
typedef double (*SpcCorrelationFn)(double theta, void *user_data);

typedef struct SpcChshConfiguration {
  double a;
  double a_prime;
  double b;
  double b_prime;
  double m_value;
} SpcChshConfiguration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *spc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spc_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to a writable `double`.
 */
enum SpcStatus spc_qm_joint_prob(double theta, int32_t oa, int32_t ob, double *out);

/**
 * # Safety
 * `out` must be a valid pointer to a writable `double`.
 */
enum SpcStatus spc_lhv_linear_corr(double theta, double *out);

/**
 * `−cos θ · S(S+1)/3` in ħ² units.
 *
 * # Safety
 * `out` must be a valid pointer to a writable `double`.
 */
enum SpcStatus spc_spin_s_corr(uint32_t two_s, double theta, double *out);

double spc_chsh(double p_ab, double p_abp, double p_apbp, double p_apb);

/**
 * Create a simulator for planar settings `theta_a`, `theta_b`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to be
 * released with [`spc_simulator_free`].
 */
enum SpcStatus spc_simulator_new(enum SpcModel model,
                                 uint32_t two_s,
                                 double theta_a,
                                 double theta_b,
                                 uint64_t seed,
                                 struct SpcSimulator **out);

/**
 * # Safety
 * `sim` must be NULL or a handle from [`spc_simulator_new`] not yet freed.
 */
void spc_simulator_free(struct SpcSimulator *sim);

/**
 * # Safety
 * `sim` must be a live simulator handle and `out` a valid pointer.
 */
enum SpcStatus spc_simulator_event(const struct SpcSimulator *sim,
                                   uint64_t seq,
                                   struct SpcEvent *out);

/**
 * Merge events `start .. start + count` into `acc`.
 *
 * # Safety
 * `sim` and `acc` must be live handles.
 */
enum SpcStatus spc_simulator_accumulate(const struct SpcSimulator *sim,
                                        uint64_t start,
                                        uint64_t count,
                                        struct SpcAccumulator *acc);

/**
 * Write `events` simulated events to a CSV event file at `path`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
enum SpcStatus spc_simulate_to_file(const char *path,
                                    enum SpcModel model,
                                    uint32_t two_s,
                                    double theta,
                                    uint64_t seed,
                                    uint64_t events);

/**
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to be
 * released with [`spc_accumulator_free`].
 */
enum SpcStatus spc_accumulator_new(uint32_t two_s, struct SpcAccumulator **out);

/**
 * # Safety
 * `acc` must be NULL or a handle from this library not yet freed.
 */
void spc_accumulator_free(struct SpcAccumulator *acc);

/**
 * # Safety
 * `acc` must be a live handle and `event` a valid pointer.
 */
enum SpcStatus spc_accumulator_push(struct SpcAccumulator *acc, const struct SpcEvent *event);

/**
 * Fold `src` into `dst`; `src` is left unchanged.
 *
 * # Safety
 * Both must be live handles.
 */
enum SpcStatus spc_accumulator_merge(struct SpcAccumulator *dst, const struct SpcAccumulator *src);

/**
 * Event count, or 0 for a NULL handle.
 *
 * # Safety
 * `acc` must be NULL or a live handle.
 */
uint64_t spc_accumulator_count(const struct SpcAccumulator *acc);

/**
 * Read an event file into a new accumulator.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum SpcStatus spc_accumulate_file(const char *path, struct SpcAccumulator **out);

/**
 * # Safety
 * `acc` must be a live handle and `out` a valid pointer.
 */
enum SpcStatus spc_plain_correlation(const struct SpcAccumulator *acc, struct SpcEstimate *out);

/**
 * # Safety
 * `acc` must be a live handle and `out` a valid pointer.
 */
enum SpcStatus spc_grouped_correlation(const struct SpcAccumulator *acc, struct SpcEstimate *out);

/**
 * Conservation residuals for all 2S+1 groups.
 *
 * Writes up to `capacity` entries to `out` and the number of groups to
 * `written`. `max_abs_normalized` receives the largest defined
 * normalized residual, or NaN when no group is populated. Returns
 * `Validation` when `capacity` is smaller than 2S+1.
 *
 * # Safety
 * `acc` must be a live handle; `out` must point to `capacity` writable
 * entries; `written` and `max_abs_normalized` may be NULL.
 */
enum SpcStatus spc_conservation_residual(const struct SpcAccumulator *acc,
                                         double theta,
                                         struct SpcGroupResidual *out,
                                         size_t capacity,
                                         size_t *written,
                                         double *max_abs_normalized);

/**
 * Maximize the CHSH value of `corr` over planar settings with `a = 0`.
 * `corr` is called from one thread at a time.
 *
 * # Safety
 * `corr` must be a valid function pointer for the duration of the call;
 * `out` must be a valid pointer.
 */
enum SpcStatus spc_maximize_chsh(SpcCorrelationFn corr,
                                 void *user_data,
                                 double grid_step,
                                 double refine_tol,
                                 struct SpcChshConfiguration *out);

/**
 * Fraction and count of grid configurations with M > 2.
 *
 * # Safety
 * `corr` must be a valid function pointer; `fraction` must be valid;
 * `violating` may be NULL.
 */
enum SpcStatus spc_violation_scan(SpcCorrelationFn corr,
                                  void *user_data,
                                  double grid_step,
                                  double *fraction,
                                  uint64_t *violating);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINCORR_H */
