# cython: language_level=3
"""Compiled filter kernels: state-space simulation, inverse-system
(prediction error) filtering and the time-varying Kalman recursion.

These are the per-time-step loops that dominate the Monte Carlo experiments,
where finite-difference optimizers evaluate them tens of thousands of times.
State dimensions are small, so all matrix products are hand-rolled loops over
preallocated scratch arrays.  Semantics match ``_filters_py`` exactly.
"""

import numpy as np

from libc.math cimport fabs, log, sqrt

DIVERGE_LIMIT = 1e12

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_NOT_PSD = 2

cdef double _DIVERGE_LIMIT = 1e12


def simulate_ss(const double[:, ::1] a, const double[:, ::1] b,
                const double[:, ::1] c, const double[:, ::1] eps,
                double[:, ::1] y_out):
    cdef Py_ssize_t t_len = eps.shape[0]
    cdef Py_ssize_t s = eps.shape[1]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef Py_ssize_t t, i, j
    cdef double acc
    for t in range(t_len):
        for i in range(s):
            acc = eps[t, i]
            for j in range(n):
                acc += c[i, j] * x[j]
            y_out[t, i] = acc
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * x[j]
            for j in range(s):
                acc += b[i, j] * eps[t, j]
            xn[i] = acc
        x[:] = xn


def simulate_ss_states(const double[:, ::1] a, const double[:, ::1] b,
                       const double[:, ::1] c, const double[:, ::1] eps,
                       double[:, ::1] y_out, double[:, ::1] x_out):
    cdef Py_ssize_t t_len = eps.shape[0]
    cdef Py_ssize_t s = eps.shape[1]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef Py_ssize_t t, i, j
    cdef double acc
    for t in range(t_len):
        for i in range(n):
            x_out[t, i] = x[i]
        for i in range(s):
            acc = eps[t, i]
            for j in range(n):
                acc += c[i, j] * x[j]
            y_out[t, i] = acc
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * x[j]
            for j in range(s):
                acc += b[i, j] * eps[t, j]
            xn[i] = acc
        x[:] = xn


def pem_filter(const double[:, ::1] a, const double[:, ::1] b,
               const double[:, ::1] c, const double[:, ::1] y,
               double[:, ::1] e_out):
    cdef Py_ssize_t t_len = y.shape[0]
    cdef Py_ssize_t s = y.shape[1]
    cdef Py_ssize_t n = a.shape[0]
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef Py_ssize_t t, i, j
    cdef double acc, xmax
    for t in range(t_len):
        for i in range(s):
            acc = y[t, i]
            for j in range(n):
                acc -= c[i, j] * x[j]
            e_out[t, i] = acc
        xmax = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * x[j]
            for j in range(s):
                acc += b[i, j] * e_out[t, j]
            xn[i] = acc
            if fabs(acc) > xmax:
                xmax = fabs(acc)
        x[:] = xn
        if n > 0 and xmax > _DIVERGE_LIMIT:
            return STATUS_DIVERGED
    return STATUS_OK


cdef int _cholesky(double[:, ::1] f, double[:, ::1] lf, Py_ssize_t s) noexcept:
    """Lower Cholesky factor of f into lf; returns 0 on success, -1 if not PD."""
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(s):
        for j in range(i + 1):
            acc = f[i, j]
            for k in range(j):
                acc -= lf[i, k] * lf[j, k]
            if i == j:
                if acc <= 0.0 or acc != acc:
                    return -1
                lf[i, i] = sqrt(acc)
            else:
                lf[i, j] = acc / lf[j, j]
    return 0


cdef void _chol_solve_vec(double[:, ::1] lf, double[::1] rhs, double[::1] out,
                          Py_ssize_t s) noexcept:
    """Solve (lf lf') out = rhs by forward then backward substitution."""
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(s):
        acc = rhs[i]
        for k in range(i):
            acc -= lf[i, k] * out[k]
        out[i] = acc / lf[i, i]
    for i in range(s - 1, -1, -1):
        acc = out[i]
        for k in range(i + 1, s):
            acc -= lf[k, i] * out[k]
        out[i] = acc / lf[i, i]


def kalman_loglik(const double[:, ::1] a, const double[:, ::1] c,
                  const double[:, ::1] q, const double[:, ::1] s_cross,
                  const double[:, ::1] r, const double[:, ::1] p0,
                  const double[:, ::1] y, double[:, ::1] e_out):
    cdef Py_ssize_t t_len = y.shape[0]
    cdef Py_ssize_t s = y.shape[1]
    cdef Py_ssize_t n = a.shape[0]

    cdef double[:, ::1] p = np.array(p0, dtype=float, copy=True)
    cdef double[:, ::1] pn = np.zeros((n, n))
    cdef double[:, ::1] f = np.zeros((s, s))
    cdef double[:, ::1] lf = np.zeros((s, s))
    cdef double[:, ::1] pc = np.zeros((n, s))    # P C'
    cdef double[:, ::1] g = np.zeros((n, s))     # A P C' + S
    cdef double[:, ::1] kg = np.zeros((n, s))    # Kalman gain
    cdef double[:, ::1] kl = np.zeros((n, s))    # K lf
    cdef double[:, ::1] ap = np.zeros((n, n))    # A P
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef double[::1] e = np.zeros(s)
    cdef double[::1] z = np.zeros(s)
    cdef double[::1] row = np.zeros(s)

    cdef double logdet = 0.0
    cdef double quad = 0.0
    cdef Py_ssize_t t, i, j, k
    cdef double acc
    cdef bint finite

    for t in range(t_len):
        # innovation e = y_t - C x
        for i in range(s):
            acc = y[t, i]
            for j in range(n):
                acc -= c[i, j] * x[j]
            e[i] = acc
            e_out[t, i] = acc
        # pc = P C'
        for i in range(n):
            for j in range(s):
                acc = 0.0
                for k in range(n):
                    acc += p[i, k] * c[j, k]
                pc[i, j] = acc
        # f = C pc + r
        for i in range(s):
            for j in range(s):
                acc = r[i, j]
                for k in range(n):
                    acc += c[i, k] * pc[k, j]
                f[i, j] = acc
        if _cholesky(f, lf, s) != 0:
            return logdet, quad, STATUS_NOT_PSD
        # forward solve lf z = e, accumulate quadratic form and log det
        for i in range(s):
            acc = e[i]
            for k in range(i):
                acc -= lf[i, k] * z[k]
            z[i] = acc / lf[i, i]
        for i in range(s):
            quad += z[i] * z[i]
            logdet += 2.0 * log(lf[i, i])
        # g = A pc + s_cross
        for i in range(n):
            for j in range(s):
                acc = s_cross[i, j]
                for k in range(n):
                    acc += a[i, k] * pc[k, j]
                g[i, j] = acc
        # gain rows: kg[i, :] solves F kg[i, :]' = g[i, :]'
        for i in range(n):
            for j in range(s):
                row[j] = g[i, j]
            _chol_solve_vec(lf, row, z, s)
            for j in range(s):
                kg[i, j] = z[j]
        # state update x <- A x + K e
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * x[j]
            for j in range(s):
                acc += kg[i, j] * e[j]
            xn[i] = acc
        x[:] = xn
        # covariance update P <- A P A' + Q - (K lf)(K lf)', symmetrized
        for i in range(n):
            for j in range(s):
                acc = 0.0
                for k in range(j, s):  # lf is lower triangular
                    acc += kg[i, k] * lf[k, j]
                kl[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc += a[i, k] * p[k, j]
                ap[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = q[i, j]
                for k in range(n):
                    acc += ap[i, k] * a[j, k]
                for k in range(s):
                    acc -= kl[i, k] * kl[j, k]
                pn[i, j] = acc
        for i in range(n):
            for j in range(n):
                p[i, j] = 0.5 * (pn[i, j] + pn[j, i])
        finite = True
        for i in range(n):
            if not (x[i] == x[i] and fabs(x[i]) < 1e300):
                finite = False
        if not finite:
            return logdet, quad, STATUS_DIVERGED
    return logdet, quad, STATUS_OK
