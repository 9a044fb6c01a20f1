#ifndef LIQPDE_H
#define LIQPDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The numbering matches the command-line exit codes where
 * they overlap.
 */
typedef enum LiqpdeStatus {
  LIQPDE_STATUS_OK = 0,
  LIQPDE_STATUS_NULL_POINTER = 1,
  LIQPDE_STATUS_VALIDATION = 2,
  LIQPDE_STATUS_SOLVER = 3,
  LIQPDE_STATUS_AUDIT = 4,
  LIQPDE_STATUS_DOMAIN = 5,
  LIQPDE_STATUS_BUFFER_TOO_SMALL = 6,
  LIQPDE_STATUS_PANIC = 7,
} LiqpdeStatus;

typedef enum LiqpdeScheme {
  LIQPDE_SCHEME_DIRECT = 0,
  LIQPDE_SCHEME_MONOTONE = 1,
} LiqpdeScheme;

typedef struct LiqpdeModel LiqpdeModel;

typedef struct LiqpdePayoff LiqpdePayoff;

typedef struct LiqpdeSurface LiqpdeSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *liqpde_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *liqpde_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum LiqpdeStatus liqpde_model_new(double sigma,
                                   double mu,
                                   double nu01,
                                   double nu10,
                                   double gamma,
                                   double horizon,
                                   struct LiqpdeModel **out);

/**
 * # Safety
 * `model` must come from `liqpde_model_new` and not be freed twice.
 */
void liqpde_model_free(struct LiqpdeModel *model);

/**
 * Writes `F0(t)` and `F1(t)` for calendar time `t` in `[0, T]`.
 *
 * # Safety
 * `model` must be a live handle; `f0`, `f1` must be writable.
 */
enum LiqpdeStatus liqpde_model_factors(const struct LiqpdeModel *model,
                                       double t,
                                       double *f0,
                                       double *f1);

/**
 * # Safety
 * `out` must be writable.
 */
enum LiqpdeStatus liqpde_payoff_call(double strike, struct LiqpdePayoff **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum LiqpdeStatus liqpde_payoff_put(double strike, struct LiqpdePayoff **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum LiqpdeStatus liqpde_payoff_constant(double level, struct LiqpdePayoff **out);

/**
 * Piecewise-linear payoff through `(s[i], h[i])`, `s` strictly increasing.
 *
 * # Safety
 * `s` and `h` must point to `len` readable doubles; `out` must be writable.
 */
enum LiqpdeStatus liqpde_payoff_tabulated(const double *s,
                                          const double *h,
                                          size_t len,
                                          struct LiqpdePayoff **out);

/**
 * # Safety
 * `payoff` must come from a `liqpde_payoff_*` constructor.
 */
void liqpde_payoff_free(struct LiqpdePayoff *payoff);

/**
 * # Safety
 * `payoff` must be live; `out` writable.
 */
enum LiqpdeStatus liqpde_payoff_evaluate(const struct LiqpdePayoff *payoff, double s, double *out);

/**
 * Solves on `x = ln S` in `[x_min, x_max]` with `n_space` nodes and
 * `n_time` steps up to the model horizon.
 *
 * # Safety
 * `model`, `payoff` must be live handles; `out` writable.
 */
enum LiqpdeStatus liqpde_solve(const struct LiqpdeModel *model,
                               const struct LiqpdePayoff *payoff,
                               double x_min,
                               double x_max,
                               size_t n_space,
                               size_t n_time,
                               enum LiqpdeScheme scheme,
                               struct LiqpdeSurface **out);

/**
 * # Safety
 * `surface` must come from `liqpde_solve`.
 */
void liqpde_surface_free(struct LiqpdeSurface *surface);

/**
 * Node count and number of time levels (`n_time + 1`).
 *
 * # Safety
 * `surface` live; outputs writable.
 */
enum LiqpdeStatus liqpde_surface_dims(const struct LiqpdeSurface *surface,
                                      size_t *n_space,
                                      size_t *n_levels);

/**
 * Copies `u` (and optionally the memory integral `I`) at time level `level`.
 * `memory` may be null.
 *
 * # Safety
 * `surface` live; `u` and non-null `memory` hold at least `len` doubles.
 */
enum LiqpdeStatus liqpde_surface_level(const struct LiqpdeSurface *surface,
                                       size_t level,
                                       double *u,
                                       double *memory,
                                       size_t len);

/**
 * Copies the grid's `S` nodes.
 *
 * # Safety
 * `surface` live; `buf` holds at least `len` doubles.
 */
enum LiqpdeStatus liqpde_surface_s_nodes(const struct LiqpdeSurface *surface,
                                         double *buf,
                                         size_t len);

/**
 * Indifference prices `p`, `q` at calendar row `row` (`t = row * dtau`).
 * `payoff` must be the one the surface was solved with.
 *
 * # Safety
 * Handles live; `p`, `q` hold at least `len` doubles.
 */
enum LiqpdeStatus liqpde_prices(const struct LiqpdeSurface *surface,
                                const struct LiqpdeModel *model,
                                const struct LiqpdePayoff *payoff,
                                size_t row,
                                double *p,
                                double *q,
                                size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIQPDE_H */
