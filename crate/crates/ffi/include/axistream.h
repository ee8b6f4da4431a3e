#ifndef AXISTREAM_H
#define AXISTREAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AxiStatus {
  AXI_STATUS_OK = 0,
  AXI_STATUS_NULL_POINTER = 1,
  AXI_STATUS_INVALID_ARGUMENT = 2,
  AXI_STATUS_SOLVER_FAILURE = 3,
  /**
   * Contour or evaluation point at a resolvent pole.
   */
  AXI_STATUS_POLE = 5,
  AXI_STATUS_PANIC = 99,
} AxiStatus;

/**
 * Cylinder, grid and assembled operator. Create with [`axi_problem_new`].
 */
typedef struct AxiProblem AxiProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a problem on `{r < radius, |z| < half_height}` with an `nr × nz` grid.
 *
 * `r0` is the inner radius of the partition of unity, `0 < 2·r0 < radius`.
 *
 * # Safety
 * `out` must be a valid pointer; the handle written there is released with [`axi_problem_free`].
 */
enum AxiStatus axi_problem_new(double radius,
                               double half_height,
                               double r0,
                               size_t nr,
                               size_t nz,
                               struct AxiProblem **out);

/**
 * # Safety
 * `problem` must come from [`axi_problem_new`] and not be used afterwards. Null is ignored.
 */
void axi_problem_free(struct AxiProblem *problem);

/**
 * Number of cells per direction.
 *
 * # Safety
 * All pointers must be valid.
 */
enum AxiStatus axi_problem_size(const struct AxiProblem *problem, size_t *nr, size_t *nz);

/**
 * Cell centers: `r` receives `nr` values, `z` receives `nz`.
 *
 * # Safety
 * `r` and `z` must hold `nr` and `nz` doubles.
 */
enum AxiStatus axi_problem_centers(const struct AxiProblem *problem, double *r, double *z);

/**
 * Solve `−ψ₁,rr − (3/r)ψ₁,r − ψ₁,zz = ω₁` with homogeneous Dirichlet data.
 *
 * `tol` is the relative residual target; pass 0 for the default. `residual`
 * and `iterations` may be null.
 *
 * # Safety
 * `omega1` and `psi1` must each hold `len = nr·nz` doubles.
 */
enum AxiStatus axi_solve(const struct AxiProblem *problem,
                         const double *omega1,
                         double *psi1,
                         size_t len,
                         double tol,
                         double *residual,
                         size_t *iterations);

/**
 * `‖u‖_{H^k_μ}` over the whole cylinder. `odd` selects the axis parity of `u`.
 *
 * # Safety
 * `field` must hold `len = nr·nz` doubles and `out` must be valid.
 */
enum AxiStatus axi_weighted_norm(const struct AxiProblem *problem,
                                 const double *field,
                                 size_t len,
                                 bool odd,
                                 size_t k,
                                 double mu,
                                 double *out);

/**
 * `R(λ) = 1/(λ(λ + 2i))`.
 *
 * # Safety
 * `out_re` and `out_im` must be valid.
 */
enum AxiStatus axi_resolvent(double re, double im, double *out_re, double *out_im);

/**
 * Solve the radial model problem in `τ = −ln r` on the contour `Im λ = h`.
 *
 * `gprime` holds `n` samples at `τ_k = lo + k·(hi − lo)/n`; `u` receives the
 * solution at the same nodes. `ode_residual` may be null.
 *
 * # Safety
 * `gprime` and `u` must each hold `n` doubles.
 */
enum AxiStatus axi_mellin_solve(const double *gprime,
                                size_t n,
                                double lo,
                                double hi,
                                double h,
                                double *u,
                                double *ode_residual);

/**
 * Copy the calling thread's last error message into `buf`, NUL-terminated and
 * truncated to `len` bytes.
 *
 * Returns the full message length without the terminator, 0 if there is none.
 *
 * # Safety
 * `buf` must hold `len` bytes or be null, in which case only the length is returned.
 */
size_t axi_last_error_message(char *buf, size_t len);

/**
 * Library version, a static NUL-terminated string.
 */
const char *axi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AXISTREAM_H */
