#ifndef RECIRC_H
#define RECIRC_H

/* Generated by cbindgen from the recirc-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RecircStatus {
  RECIRC_STATUS_OK = 0,
  RECIRC_STATUS_NULL_POINTER = 1,
  RECIRC_STATUS_INVALID_ARGUMENT = 2,
  RECIRC_STATUS_CONFIG = 3,
  RECIRC_STATUS_NUMERICAL = 4,
  RECIRC_STATUS_IO = 5,
  /**
   * The simulation has not been run yet.
   */
  RECIRC_STATUS_NOT_RUN = 6,
  RECIRC_STATUS_BUFFER_TOO_SMALL = 7,
  RECIRC_STATUS_PANIC = 99,
} RecircStatus;

/**
 * Opaque simulation handle.
 */
typedef struct RecircSimulation RecircSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Owned by the library and valid
 * until the next failing call on the same thread.
 */
const char *recirc_last_error(void);

/**
 * Library version, a static string.
 */
const char *recirc_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void recirc_string_free(char *s);

/**
 * Dissipation potential of the symmetric part of the row-major 2x2 tensor `eps`.
 *
 * # Safety
 * `eps` must point to 4 doubles and `out` to one writable double.
 */
enum RecircStatus recirc_potential(double nu, double nu_tur, const double *eps, double *out);

/**
 * Effective viscosity `2ν + 2ν_tur|ε|` for the row-major 2x2 tensor `eps`.
 *
 * # Safety
 * `eps` must point to 4 doubles and `out` to one writable double.
 */
enum RecircStatus recirc_beta(double nu, double nu_tur, const double *eps, double *out);

/**
 * Validates a JSON run config. `report` (optional) receives a JSON document
 * `{"valid": bool, "errors": [{"path", "message"}]}` to free with [`recirc_string_free`].
 * Returns `Ok` for a valid config and `Config` otherwise.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `report` null or writable.
 */
enum RecircStatus recirc_config_validate(const char *json, char **report);

/**
 * Builds the lifting and eigenbasis for a JSON run config.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum RecircStatus recirc_simulation_new(const char *json, struct RecircSimulation **out);

/**
 * Like [`recirc_simulation_new`] for a built-in config (`four-pump`, `zero-data`,
 * `vortex-decay`, `manufactured`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum RecircStatus recirc_simulation_from_preset(const char *name, struct RecircSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from this library that has not been freed.
 */
void recirc_simulation_free(struct RecircSimulation *sim);

/**
 * Integrates to the final time. A failed step returns `Numerical`; the partial
 * trajectory stays available.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum RecircStatus recirc_simulation_run(struct RecircSimulation *sim);

/**
 * Number of reduced modes.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum RecircStatus recirc_simulation_modes(struct RecircSimulation *sim, size_t *out);

/**
 * Number of saved states (steps + 1) after a run.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum RecircStatus recirc_simulation_state_count(struct RecircSimulation *sim, size_t *out);

/**
 * Copies the time and mode coefficients of saved state `index` into `time` and `buf`
 * (`len` must be at least the mode count).
 *
 * # Safety
 * `sim` must be a live handle, `time` writable and `buf` valid for `len` doubles.
 */
enum RecircStatus recirc_simulation_copy_state(struct RecircSimulation *sim,
                                               size_t index,
                                               double *time,
                                               double *buf,
                                               size_t len);

/**
 * Run summary as JSON, to free with [`recirc_string_free`].
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum RecircStatus recirc_simulation_summary_json(struct RecircSimulation *sim, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECIRC_H */
