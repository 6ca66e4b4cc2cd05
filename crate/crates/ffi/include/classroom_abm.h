#ifndef CLASSROOM_ABM_H
#define CLASSROOM_ABM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CabmStatus {
  CABM_STATUS_OK = 0,
  CABM_STATUS_NULL_POINTER = 1,
  CABM_STATUS_INVALID_ARGUMENT = 2,
  CABM_STATUS_IO = 3,
  CABM_STATUS_DATA = 4,
  CABM_STATUS_SIMULATION = 5,
  CABM_STATUS_OUT_OF_RANGE = 6,
  CABM_STATUS_PANIC = 7,
} CabmStatus;

typedef enum CabmInputFormat {
  CABM_INPUT_FORMAT_FUSED = 0,
  CABM_INPUT_FORMAT_RAW = 1,
} CabmInputFormat;

typedef enum CabmRegime {
  CABM_REGIME_MIXED = 0,
  CABM_REGIME_STRUCTURED = 1,
  CABM_REGIME_UNSTRUCTURED = 2,
} CabmRegime;

typedef enum CabmScenario {
  CABM_SCENARIO_FULL_NOVAX = 0,
  CABM_SCENARIO_FULL_VAX = 1,
  CABM_SCENARIO_HALF_NOVAX = 2,
  CABM_SCENARIO_HALF_VAX = 3,
} CabmScenario;

/**
 * Opaque observation handle.
 */
typedef struct CabmObservation CabmObservation;

/**
 * Opaque collection of run outcomes.
 */
typedef struct CabmResults CabmResults;

typedef struct CabmCalibrationInputs {
  double r0;
  /**
   * Per day.
   */
  double gamma;
  double n_contacts;
  double contact_radius_m;
  double contact_duration_min;
  double sigma_r_m;
  double sigma_theta_rad;
} CabmCalibrationInputs;

typedef struct CabmCalibration {
  double rho_daily;
  double beta_bar_daily;
  double beta_max_per_day;
  double beta_max_per_second;
} CabmCalibration;

typedef struct CabmKernelParams {
  /**
   * Per second.
   */
  double beta_max;
  double sigma_r;
  double sigma_theta;
  /**
   * Per hour; used only in airborne mode.
   */
  double lambda_decay;
  double min_distance;
  bool airborne;
} CabmKernelParams;

typedef struct CabmSynthConfig {
  size_t n_children;
  size_t n_teachers;
  double room_width;
  double room_height;
  /**
   * Seconds.
   */
  uint32_t session_length;
  enum CabmRegime regime;
  double speed_min;
  double speed_max;
  size_t children_per_cluster;
  uint64_t seed;
} CabmSynthConfig;

typedef struct CabmSweepOptions {
  enum CabmScenario scenario;
  uint32_t reps_per_patient_zero;
  uint32_t horizon_days;
  uint64_t base_seed;
  double vaccine_efficacy;
  /**
   * 0 uses all available cores.
   */
  size_t workers;
} CabmSweepOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length of the last error message including the terminating NUL, or 0.
 */
size_t cabm_last_error_length(void);

/**
 * Copies the last error message into `buf` (truncated and NUL-terminated
 * when `len` is too small). Returns the full length including the NUL.
 */
size_t cabm_last_error_message(char *buf, size_t len);

void cabm_clear_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cabm_version(void);

enum CabmStatus cabm_calibration_inputs_default(struct CabmCalibrationInputs *out);

enum CabmStatus cabm_calibrate(const struct CabmCalibrationInputs *inputs,
                               struct CabmCalibration *out);

enum CabmStatus cabm_kernel_params_default(struct CabmKernelParams *out);

/**
 * Pair rate per second at distance `r` (meters) and facing angles
 * `theta_i`, `theta_j` (radians).
 */
enum CabmStatus cabm_pair_rate(const struct CabmKernelParams *params,
                               double r,
                               double theta_i,
                               double theta_j,
                               double *out);

enum CabmStatus cabm_observation_load(const char *path,
                                      enum CabmInputFormat format,
                                      struct CabmObservation **out);

enum CabmStatus cabm_synth_config_default(struct CabmSynthConfig *out);

enum CabmStatus cabm_observation_synth(const struct CabmSynthConfig *config,
                                       struct CabmObservation **out);

/**
 * Writes the fused CSV and its metadata sidecar.
 */
enum CabmStatus cabm_observation_save(const struct CabmObservation *obs, const char *path);

enum CabmStatus cabm_observation_roster_size(const struct CabmObservation *obs, size_t *out);

/**
 * Session length in seconds (one frame per second).
 */
enum CabmStatus cabm_observation_session_length(const struct CabmObservation *obs, size_t *out);

void cabm_observation_free(struct CabmObservation *obs);

enum CabmStatus cabm_sweep_options_default(struct CabmSweepOptions *out);

/**
 * Every roster member as patient zero for `reps_per_patient_zero`
 * replicates. `kernel` may be null for the calibrated defaults.
 */
enum CabmStatus cabm_sweep(const struct CabmObservation *obs,
                           const struct CabmKernelParams *kernel,
                           const struct CabmSweepOptions *options,
                           struct CabmResults **out);

enum CabmStatus cabm_results_len(const struct CabmResults *res, size_t *out);

enum CabmStatus cabm_results_saturation(const struct CabmResults *res, size_t index, double *out);

/**
 * Final `[S, E, I, R]` counts into `out[0..4]`.
 */
enum CabmStatus cabm_results_final_counts(const struct CabmResults *res,
                                          size_t index,
                                          uint32_t *out);

/**
 * Days to the `n`th symptomatic onset; `*present` is false when it never
 * occurs.
 */
enum CabmStatus cabm_results_nth_symptomatic(const struct CabmResults *res,
                                             size_t index,
                                             size_t n,
                                             double *out_days,
                                             bool *out_present);

enum CabmStatus cabm_results_emergence_proportion(const struct CabmResults *res,
                                                  size_t n,
                                                  double *out);

/**
 * Writes `summary.csv`, `curves.csv` and `emergence.csv` into `dir`.
 */
enum CabmStatus cabm_results_write(const struct CabmResults *res, const char *dir);

void cabm_results_free(struct CabmResults *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLASSROOM_ABM_H */
