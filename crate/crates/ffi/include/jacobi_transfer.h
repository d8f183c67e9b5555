#ifndef JACOBI_TRANSFER_H
#define JACOBI_TRANSFER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JtStatus {
  JT_STATUS_OK = 0,
  JT_STATUS_NULL_ARGUMENT = 1,
  JT_STATUS_INVALID_UTF8 = 2,
  JT_STATUS_INVALID_INPUT = 3,
  // No transfer exists for the requested geometry or energy.
  JT_STATUS_INFEASIBLE = 4,
  JT_STATUS_NOT_CONVERGED = 5,
  JT_STATUS_EMPTY_RESULT = 6,
  JT_STATUS_IO = 7,
  JT_STATUS_OUT_OF_RANGE = 8,
  JT_STATUS_PANIC = 9,
} JtStatus;

typedef enum JtBackend {
  JT_BACKEND_ELLIPSE = 0,
  JT_BACKEND_HEATFLOW = 1,
} JtBackend;

typedef enum JtMode {
  JT_MODE_COARSE_TO_FINE = 0,
  JT_MODE_REFINE_ONLY = 1,
} JtMode;

// Result of [`jt_solve`].
typedef struct JtReport JtReport;

// Transfer scenario: body, orbits and planner settings.
typedef struct JtScenario JtScenario;

// Sampled states along a solved transfer.
typedef struct JtTrajectory JtTrajectory;

// Library version as a static NUL-terminated string.
const char *jt_version(void);

// Message describing the last failed call on this thread, or NULL. The
// pointer stays valid until the next `jt_*` call on the same thread.
const char *jt_last_error_message(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void jt_string_free(char *s);

// Parse a scenario from JSON text.
//
// # Safety
// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
// point to writable storage for one pointer.
enum JtStatus jt_scenario_from_json(const char *json, struct JtScenario **out);

// Load a scenario file, or a bundled scenario by name.
//
// # Safety
// As [`jt_scenario_from_json`].
enum JtStatus jt_scenario_resolve(const char *path_or_name, struct JtScenario **out);

// # Safety
// `scenario` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
enum JtStatus jt_scenario_to_json(const struct JtScenario *scenario, char **out);

// # Safety
// `scenario` must be NULL or a live handle.
enum JtStatus jt_scenario_set_seed(struct JtScenario *scenario, uint64_t seed);

// `backend` takes a [`JtBackend`] value.
//
// # Safety
// `scenario` must be NULL or a live handle.
enum JtStatus jt_scenario_set_backend(struct JtScenario *scenario, uint32_t backend);

// # Safety
// `scenario` must be NULL or a handle from this library, not yet freed.
void jt_scenario_free(struct JtScenario *scenario);

// Plan the transfer. `mode` takes a [`JtMode`] value. Returns
// `JT_STATUS_EMPTY_RESULT` when no feasible candidate exists.
//
// # Safety
// `scenario` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
enum JtStatus jt_solve(const struct JtScenario *scenario, uint32_t mode, struct JtReport **out);

// # Safety
// As [`jt_scenario_from_json`].
enum JtStatus jt_report_from_json(const char *json, struct JtReport **out);

// # Safety
// `report` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
enum JtStatus jt_report_to_json(const struct JtReport *report, char **out);

// Total impulse (km/s).
//
// # Safety
// `report` must be NULL or a live handle; `out` NULL or writable.
enum JtStatus jt_report_total_dv(const struct JtReport *report, double *out);

// Time of flight (s).
//
// # Safety
// As [`jt_report_total_dv`].
enum JtStatus jt_report_tof(const struct JtReport *report, double *out);

// Departure and arrival impulse vectors (km/s), three values each.
//
// # Safety
// `report` must be NULL or a live handle; `dv0` and `dvf` NULL or arrays
// of at least three doubles.
enum JtStatus jt_report_impulses(const struct JtReport *report, double *dv0, double *dvf);

// Departure and arrival positions (km), three values each.
//
// # Safety
// As [`jt_report_impulses`].
enum JtStatus jt_report_endpoints(const struct JtReport *report, double *p0, double *pf);

// # Safety
// `report` must be NULL or a handle from this library, not yet freed.
void jt_report_free(struct JtReport *report);

// Sample `n` states along the solved transfer, uniform in curve parameter.
//
// # Safety
// `report` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
enum JtStatus jt_trajectory_new(const struct JtReport *report, size_t n, struct JtTrajectory **out);

// # Safety
// `traj` must be NULL or a live handle; `out` NULL or writable.
enum JtStatus jt_trajectory_len(const struct JtTrajectory *traj, size_t *out);

// Row `i` as `(t, x, y, z, vx, vy, vz)`.
//
// # Safety
// `traj` must be NULL or a live handle; `row` NULL or an array of at least
// seven doubles.
enum JtStatus jt_trajectory_row(const struct JtTrajectory *traj, size_t i, double *row);

// The whole trajectory as CSV with a `t,x,y,z,vx,vy,vz` header.
//
// # Safety
// `traj` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
enum JtStatus jt_trajectory_to_csv(const struct JtTrajectory *traj, char **out);

// # Safety
// `traj` must be NULL or a handle from this library, not yet freed.
void jt_trajectory_free(struct JtTrajectory *traj);

// Optimal-ΔV grid over a `resolution` x `resolution` division of both orbits
// (plus the closing row and column) as CSV in
// `csv_out` and the axis metadata as JSON in `meta_out`.
//
// # Safety
// `scenario` must be NULL or a live handle; `csv_out` and `meta_out` as the
// `out` argument of [`jt_scenario_from_json`].
enum JtStatus jt_contour(const struct JtScenario *scenario,
                         size_t resolution,
                         char **csv_out,
                         char **meta_out);

// Write a report to `path` as JSON (atomically).
//
// # Safety
// `report` must be NULL or a live handle; `path` NULL or NUL-terminated.
enum JtStatus jt_report_save(const struct JtReport *report, const char *path);

#endif  /* JACOBI_TRANSFER_H */
