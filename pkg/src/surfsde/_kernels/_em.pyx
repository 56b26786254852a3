# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama stepping core.

Same arithmetic as the NumPy twin in em_numpy.py, written as plain loops so
the per-step Python overhead disappears for large ensembles. Operation order
inside dot products differs from BLAS, so cross-implementation agreement is
to rounding, not bitwise; determinism holds within each implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

DEF BLOWUP_LIMIT = 1e8


cdef inline double _psi(int kind, double p0, double p1, double p2, double s) noexcept nogil:
    if kind == 0:
        return s
    if kind == 1:
        if s < 0.0:
            return p0 * s
        if s > p2:
            return p1 * (s - p2)
        return 0.0
    if kind == 3:
        return 0.0
    if s == 0.0:
        return 0.0
    return pow(fabs(s), p2 - 2.0) * s


def em_path_compiled(
    double[:, ::1] seed,      # (N, n)
    double[:, ::1] irn,       # (M, N)
    double[:, :, ::1] me,     # (M, N, n)
    double[:, :, ::1] tmat,   # (M, n, n)
    double[:, :, ::1] at,     # (M+1, n, n)
    double[::1] gammas,       # (K,)
    bint multiplicative,
    int kind,
    double p0,
    double p1,
    double p2,
    double dt,
    double[::1] x0,           # (n,)
    double[:, ::1] dw,        # (M, K)
):
    cdef Py_ssize_t n_grid = seed.shape[0]
    cdef Py_ssize_t n = seed.shape[1]
    cdef Py_ssize_t m_steps = dw.shape[0]
    cdef Py_ssize_t k_modes = gammas.shape[0]

    out_arr = np.empty((m_steps + 1, n))
    cdef double[:, ::1] out = out_arr
    u_arr = np.empty(n_grid)
    cdef double[::1] u = u_arr
    pair_arr = np.empty(n)
    cdef double[::1] pair = pair_arr
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_arr

    cdef Py_ssize_t m, i, j, kk
    cdef double acc, s, psi, coef, step, amax
    cdef long blow = -1

    for j in range(n):
        out[0, j] = x[j]

    with nogil:
        for m in range(m_steps):
            if blow >= 0:
                for j in range(n):
                    out[m + 1, j] = x[j]
                continue
            # u = seed @ x, then pair_j = -sum_i psi(u_i * irn_i) * me[i, j]
            for j in range(n):
                pair[j] = 0.0
            for i in range(n_grid):
                acc = 0.0
                for j in range(n):
                    acc += seed[i, j] * x[j]
                s = acc * irn[m, i]
                psi = _psi(kind, p0, p1, p2, s)
                for j in range(n):
                    pair[j] -= psi * me[m, i, j]
            # drift coefficients a = tmat[m] @ pair, then the step
            amax = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += tmat[m, i, j] * pair[j]
                step = acc * dt
                if i < k_modes:
                    if multiplicative:
                        coef = 0.0
                        for j in range(n):
                            coef += x[j] * at[m, j, i]
                        coef = gammas[i] * coef / sqrt(at[m, i, i])
                        step += coef * dw[m, i]
                    else:
                        step += gammas[i] * dw[m, i]
                out[m + 1, i] = x[i] + step
                if fabs(out[m + 1, i]) > amax:
                    amax = fabs(out[m + 1, i])
            if amax > BLOWUP_LIMIT:
                blow = m
                for i in range(n):
                    out[m + 1, i] = x[i]
            else:
                for i in range(n):
                    x[i] = out[m + 1, i]

    return out_arr, blow
