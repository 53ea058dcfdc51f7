# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled inner loop of the reweighted least-squares solver.

Mirrors ``blocklp.solver._irls_loop_py`` step for step: per-block weights
from the current iterate, column-scaled Gram system, Cholesky solve, update,
geometric smoothing decay with a floor. All dense algebra goes through the
BLAS/LAPACK wrappers exported by SciPy, single right-hand side, no Python
objects inside the loop (the GIL is released for the whole iteration).
"""

import numpy as np

from libc.math cimport isfinite, pow, sqrt

from scipy.linalg.cython_blas cimport dgemv, dsyrk
from scipy.linalg.cython_lapack cimport dpotrf, dpotrs


cdef void _raise_solver_error(str message):
    from blocklp.solver import SolverError
    raise SolverError(message)


def irls_loop(const double[:, ::1] A, const double[::1] y, const double[::1] x0,
              const double[::1] w_clamped, int d, double p, double lam,
              double gamma0, double gamma_decay, double gamma_floor,
              double tol, int max_iter):
    """Run the solver loop; returns (x, iterations, converged, gamma, step)."""
    cdef int m = A.shape[0]
    cdef int N = A.shape[1]
    cdef int n = w_clamped.shape[0]
    if n * d != N:
        raise ValueError("block count times block length must equal the column count")

    x_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[:, ::1] B = np.empty((m, N), dtype=np.float64)
    cdef double[:, ::1] G = np.empty((m, m), dtype=np.float64)
    cdef double[::1] c = np.empty(m, dtype=np.float64)
    cdef double[::1] t_vec = np.empty(N, dtype=np.float64)
    cdef double[::1] s = np.empty(n, dtype=np.float64)
    cdef double[::1] w_factor = np.empty(n, dtype=np.float64)

    cdef double s_expo = 0.5 - 0.25 * p
    cdef double gamma = gamma0
    cdef double gamma_used = gamma0
    cdef double step = 0.0
    cdef double acc, diff, xn, si
    cdef int t, i, j, r, col, iterations = 0, fail_iter = -1
    cdef bint converged = 0, cholesky_failed = 0

    cdef char uplo = c'L'
    cdef char trans_t = c'T'
    cdef char no_trans = c'N'
    cdef int one = 1, info = 0
    cdef double f_one = 1.0, f_zero = 0.0

    with nogil:
        for i in range(n):
            w_factor[i] = pow(w_clamped[i], 2.0 / (p - 2.0))
        for j in range(N):
            x[j] = x0[j]

        for t in range(max_iter):
            # Inverse block weights s_i = W_i^-1 = (gamma + wf_i ||x[i]||^2)^(1/2 - p/4).
            for i in range(n):
                acc = 0.0
                for j in range(i * d, (i + 1) * d):
                    acc += x[j] * x[j]
                s[i] = pow(gamma + w_factor[i] * acc, s_expo)

            # B = A with column j scaled by s[j // d].
            for r in range(m):
                for col in range(N):
                    B[r, col] = A[r, col] * s[col / d]

            # G = B B^T + lam I. The C-ordered (m, N) buffer reads as the
            # Fortran (N, m) matrix B^T, so dsyrk('T') forms B B^T directly.
            dsyrk(&uplo, &trans_t, &m, &N, &f_one, &B[0, 0], &N, &f_zero,
                  &G[0, 0], &m)
            for i in range(m):
                G[i, i] += lam

            info = 0
            dpotrf(&uplo, &m, &G[0, 0], &m, &info)
            if info != 0:
                cholesky_failed = 1
                fail_iter = t
                break
            for i in range(m):
                c[i] = y[i]
            dpotrs(&uplo, &m, &one, &G[0, 0], &m, &c[0], &m, &info)
            if info != 0:
                cholesky_failed = 1
                fail_iter = t
                break

            # t_vec = B^T c, then x_next = s (.) t_vec blockwise.
            dgemv(&no_trans, &N, &m, &f_one, &B[0, 0], &N, &c[0], &one,
                  &f_zero, &t_vec[0], &one)

            acc = 0.0
            for col in range(N):
                si = s[col / d]
                xn = si * t_vec[col]
                diff = xn - x[col]
                acc += diff * diff
                x[col] = xn
            if not isfinite(acc):
                fail_iter = t
                break
            step = sqrt(acc)

            gamma_used = gamma
            gamma = gamma * gamma_decay
            if gamma < gamma_floor:
                gamma = gamma_floor
            iterations = t + 1
            if step <= tol:
                converged = 1
                break

    if fail_iter >= 0:
        if cholesky_failed:
            _raise_solver_error(
                f"iteration {fail_iter}: m x m solve failed (factorization info)"
            )
        _raise_solver_error(
            f"iteration {fail_iter}: m x m solve produced non-finite entries"
        )
    return x_arr, iterations, converged, gamma_used, step
