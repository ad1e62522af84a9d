# cython: language_level=3
"""Compiled inner loops: segmented log-sum-exp and the SEIR RK4 integrator."""
from libc.math cimport exp, log1p

import numpy as np


def segment_lse(double[::1] z, long[::1] starts):
    """Log-sum-exp of ``z[starts[i]:starts[i+1]]`` and the softmax weights."""
    cdef Py_ssize_t m = starts.shape[0] - 1
    cdef Py_ssize_t i, t, lo, hi, imax
    cdef double zmax, s
    vals_arr = np.empty(m)
    p_arr = np.empty(z.shape[0])
    cdef double[::1] vals = vals_arr
    cdef double[::1] p = p_arr
    for i in range(m):
        lo = starts[i]
        hi = starts[i + 1]
        imax = lo
        for t in range(lo + 1, hi):
            if z[t] > z[imax]:
                imax = t
        zmax = z[imax]
        # s excludes the max term so log1p keeps precision when the result is tiny
        s = 0.0
        for t in range(lo, hi):
            if t == imax:
                p[t] = 1.0
            else:
                p[t] = exp(z[t] - zmax)
                s += p[t]
        for t in range(lo, hi):
            p[t] /= 1.0 + s
        vals[i] = zmax + log1p(s)
    return vals_arr, p_arr


cdef void _rhs(Py_ssize_t n, double[::1] beta, double[::1] gamma, double[::1] delta,
               double[:, ::1] A, double* y, double* dy) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double force, inf
    for i in range(n):
        force = 0.0
        for j in range(n):
            force += A[i, j] * y[2 * n + j]
        inf = beta[i] * y[i] * force
        dy[i] = -inf
        dy[n + i] = inf - gamma[i] * y[n + i]
        dy[2 * n + i] = gamma[i] * y[n + i] - delta[i] * y[2 * n + i]
        dy[3 * n + i] = delta[i] * y[2 * n + i]


cdef double _infection_trend(Py_ssize_t n, double[::1] beta, double[::1] delta,
                             double[:, ::1] A, double* y) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double force, d = 0.0
    for i in range(n):
        force = 0.0
        for j in range(n):
            force += A[i, j] * y[2 * n + j]
        d += beta[i] * y[i] * force - delta[i] * y[2 * n + i]
    return d


def rk4_seir(double[::1] beta, double[::1] gamma, double[::1] delta, double[:, ::1] A,
             double[::1] y0, double dt, Py_ssize_t max_steps, double floor, double neg_tol):
    """Fixed-step RK4 for the multigroup SEIR equations.

    Returns ``(states, steps, status)`` with ``status`` 0 = reached
    ``max_steps``, 1 = infections below ``floor`` and non-increasing,
    2 = a compartment fell below ``-neg_tol``.
    """
    cdef Py_ssize_t n = beta.shape[0]
    cdef Py_ssize_t d = 4 * n
    cdef Py_ssize_t step, k
    cdef int status = 0
    cdef double inf_total
    out_arr = np.empty((max_steps + 1, d))
    cdef double[:, ::1] out = out_arr
    work_arr = np.empty(6 * d)
    cdef double[::1] work = work_arr
    cdef double* y = &work[0]
    cdef double* k1 = &work[d]
    cdef double* k2 = &work[2 * d]
    cdef double* k3 = &work[3 * d]
    cdef double* k4 = &work[4 * d]
    cdef double* tmp = &work[5 * d]

    for k in range(d):
        y[k] = y0[k]
        out[0, k] = y0[k]

    step = 0
    with nogil:
        while True:
            inf_total = 0.0
            for k in range(n, 3 * n):
                inf_total += y[k]
            if inf_total < floor and _infection_trend(n, beta, delta, A, y) <= 0.0:
                status = 1
                break
            if step >= max_steps:
                status = 0
                break
            _rhs(n, beta, gamma, delta, A, y, k1)
            for k in range(d):
                tmp[k] = y[k] + 0.5 * dt * k1[k]
            _rhs(n, beta, gamma, delta, A, tmp, k2)
            for k in range(d):
                tmp[k] = y[k] + 0.5 * dt * k2[k]
            _rhs(n, beta, gamma, delta, A, tmp, k3)
            for k in range(d):
                tmp[k] = y[k] + dt * k3[k]
            _rhs(n, beta, gamma, delta, A, tmp, k4)
            step += 1
            for k in range(d):
                y[k] = y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
                out[step, k] = y[k]
            for k in range(d):
                if y[k] < -neg_tol:
                    status = 2
                    break
            if status == 2:
                break
    return out_arr[: step + 1].copy(), step, status
