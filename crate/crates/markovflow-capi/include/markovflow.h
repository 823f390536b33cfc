#ifndef MARKOVFLOW_H
#define MARKOVFLOW_H

/* Generated by cbindgen from markovflow-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes for every fallible entry point.
 */
typedef enum {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_ARGUMENT = 1,
  MF_STATUS_INVALID_UTF8 = 2,
  MF_STATUS_SCHEMA_ERROR = 3,
  MF_STATUS_INVALID_FAMILY = 4,
  MF_STATUS_NOT_COMMUTING = 5,
  MF_STATUS_POLE_PROXIMITY = 6,
  MF_STATUS_QUADRATURE_NOT_CONVERGED = 7,
  MF_STATUS_SERIES_NOT_CONVERGED = 8,
  MF_STATUS_SUMMATORY_OUT_OF_RANGE = 9,
  MF_STATUS_NONPOSITIVE_SPECTRUM = 10,
  MF_STATUS_STEP_UNDERFLOW = 11,
  MF_STATUS_ILL_CONDITIONED = 12,
  MF_STATUS_DIMENSION_MISMATCH = 13,
  MF_STATUS_NON_FINITE_INPUT = 14,
  MF_STATUS_EIGENVALUES_NOT_CONVERGED = 15,
  MF_STATUS_IO = 16,
  MF_STATUS_CHECKS_FAILED = 17,
  MF_STATUS_INTERNAL = 18,
} MfStatus;

/**
 * Opaque run report with lazily rendered, handle-owned strings.
 */
typedef struct MfReport MfReport;

/**
 * Opaque parsed scenario.
 */
typedef struct MfScenario MfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mf_version(void);

/**
 * Message of the last failure on this thread. Never null; empty before the
 * first failure. The pointer stays valid until the next failing call on
 * the same thread.
 */
const char *mf_last_error_message(void);

/**
 * Parses and validates a scenario JSON document into an opaque handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
MfStatus mf_scenario_parse(const char *json, MfScenario **out);

/**
 * Frees a scenario handle. Accepts null.
 *
 * # Safety
 * `scenario` must be null or a pointer returned by [`mf_scenario_parse`].
 */
void mf_scenario_free(MfScenario *scenario);

/**
 * Grid size of a parsed scenario (0 on null input).
 *
 * # Safety
 * `scenario` must be null or a valid scenario handle.
 */
uintptr_t mf_scenario_grid_points(const MfScenario *scenario);

/**
 * Runs all checks of a scenario and returns an opaque report handle.
 *
 * # Safety
 * `scenario` must be a valid scenario handle and `out` a valid pointer.
 */
MfStatus mf_scenario_run(const MfScenario *scenario, MfReport **out);

/**
 * Frees a report handle and all strings it owns. Accepts null.
 *
 * # Safety
 * `report` must be null or a pointer returned by [`mf_scenario_run`].
 */
void mf_report_free(MfReport *report);

/**
 * Whether every requested check passed.
 *
 * # Safety
 * `report` must be null or a valid report handle.
 */
bool mf_report_passed(const MfReport *report);

/**
 * The CSV report; owned by the handle.
 *
 * # Safety
 * `report` must be a valid report handle.
 */
const char *mf_report_csv(const MfReport *report);

/**
 * The JSON report; owned by the handle.
 *
 * # Safety
 * `report` must be a valid report handle.
 */
const char *mf_report_json(const MfReport *report);

/**
 * The per-check verdict summary, one line per check; owned by the handle.
 *
 * # Safety
 * `report` must be a valid report handle.
 */
const char *mf_report_summary(const MfReport *report);

/**
 * `exp(t·Q_x)` for the equal-input generator with the given parameter
 * vector; writes the dense result row-major into `out_matrix`
 * (`dim·dim` doubles).
 *
 * # Safety
 * `params` must point to `dim` doubles and `out_matrix` to `dim·dim`
 * writable doubles.
 */
MfStatus mf_ei_exp(uintptr_t dim, const double *params, double t, double *out_matrix);

/**
 * The equal-input BCH logarithm `log(exp(Q_x)·exp(Q_y))`; writes the
 * resulting parameter vector into `out_params` (`dim` doubles).
 *
 * # Safety
 * `x` and `y` must point to `dim` doubles and `out_params` to `dim`
 * writable doubles.
 */
MfStatus mf_bch_log(uintptr_t dim, const double *x, const double *y, double *out_params);

/**
 * Principal equal-input logarithm of `M_x` given its parameter vector;
 * writes the generator parameters and the homogeneous-embeddability
 * verdict.
 *
 * # Safety
 * `params` must point to `dim` doubles, `out_params` to `dim` writable
 * doubles, and `out_embeddable` to a writable bool.
 */
MfStatus mf_ei_principal_log(uintptr_t dim,
                             const double *params,
                             double *out_params,
                             bool *out_embeddable);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOVFLOW_H */
