/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TCMERTON_H
#define TCMERTON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TcmStatus {
  TCM_STATUS_OK = 0,
  TCM_STATUS_NULL_POINTER = 1,
  /**
   * A model, grid or solver parameter is invalid, or the config text does not parse.
   */
  TCM_STATUS_INVALID_ARGUMENT = 2,
  TCM_STATUS_NO_CONVERGENCE = 3,
  /**
   * The query point lies outside the solved grid or the covered wealth range.
   */
  TCM_STATUS_OUT_OF_RANGE = 4,
  /**
   * Numerical failure inside the solver.
   */
  TCM_STATUS_NUMERICAL = 5,
  TCM_STATUS_IO = 6,
  TCM_STATUS_PANIC = 7,
} TcmStatus;

/**
 * Opaque handle to a converged solution.
 */
typedef struct TcmSolution TcmSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves the problem described by a TOML configuration string.
 *
 * On success `*out` receives a handle; on failure it is set to null.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TcmStatus tcm_solve_config(const char *config_toml, struct TcmSolution **out);

/**
 * Solves the problem described by a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TcmStatus tcm_solve_config_file(const char *path, struct TcmSolution **out);

/**
 * Releases a handle. Null is accepted.
 *
 * # Safety
 * `sol` must come from a solve function and not have been freed.
 */
void tcm_solution_free(struct TcmSolution *sol);

/**
 * Equilibrium discount rate `rho_bar(t, y)`, bilinear between grid nodes.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_rho_bar(const struct TcmSolution *sol, double t, double y, double *out);

/**
 * Wealth map `p_bar(t, y)`.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_pbar(const struct TcmSolution *sol, double t, double y, double *out);

/**
 * The `y` with `p_bar(t, y) = x`.
 *
 * # Safety
 * `sol` must be a live handle and `y_out` writable.
 */
enum TcmStatus tcm_invert_pbar(const struct TcmSolution *sol, double t, double x, double *y_out);

/**
 * Equilibrium controls at wealth `x`: risky fraction `pi` and consumption per unit wealth `c`.
 *
 * # Safety
 * `sol` must be a live handle; `pi_out` and `c_out` writable.
 */
enum TcmStatus tcm_controls(const struct TcmSolution *sol,
                            double t,
                            double x,
                            double *pi_out,
                            double *c_out);

/**
 * Marginal value `v(t, x)`.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_marginal_value(const struct TcmSolution *sol, double t, double x, double *out);

/**
 * Equilibrium value `G(t, x)`.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_value(const struct TcmSolution *sol, double t, double x, double *out);

/**
 * Fixed-point iterations used; 0 when the first iterate was already a fixed point.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_iterations(const struct TcmSolution *sol, size_t *out);

/**
 * Final fixed-point residual in the sup norm of the value and its `y`-derivative.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum TcmStatus tcm_residual(const struct TcmSolution *sol, double *out);

/**
 * Horizon and `y`-limits of the solved grid.
 *
 * # Safety
 * `sol` must be a live handle; every output pointer writable.
 */
enum TcmStatus tcm_grid(const struct TcmSolution *sol,
                        double *horizon,
                        double *y_min,
                        double *y_max,
                        size_t *n_t,
                        size_t *n_y);

/**
 * Copies the last error message of this thread into `buf`, truncated and NUL-terminated.
 *
 * Returns the full message length excluding the terminator, or 0 when no error is recorded.
 * Passing a null `buf` or zero `len` only queries the length.
 *
 * # Safety
 * `buf` must be writable for `len` bytes when non-null.
 */
size_t tcm_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tcm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TCMERTON_H */
