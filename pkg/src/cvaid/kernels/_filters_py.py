"""Pure-NumPy reference implementation of the filter kernels.

Mirrors ``_filters.pyx`` operation by operation so both backends agree to
rounding error.  Selected automatically when the compiled extension is
unavailable or when CVAID_PURE_PYTHON is set.
"""

import numpy as np

DIVERGE_LIMIT = 1e12

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_NOT_PSD = 2


def simulate_ss(a, b, c, eps, y_out):
    n = a.shape[0]
    x = np.zeros(n)
    for t in range(eps.shape[0]):
        y_out[t] = c @ x + eps[t]
        x = a @ x + b @ eps[t]


def simulate_ss_states(a, b, c, eps, y_out, x_out):
    n = a.shape[0]
    x = np.zeros(n)
    for t in range(eps.shape[0]):
        x_out[t] = x
        y_out[t] = c @ x + eps[t]
        x = a @ x + b @ eps[t]


def pem_filter(a, b, c, y, e_out):
    """Inverse-system recursion from x_1 = 0; returns a status code.

    Flags divergence once max |x_t| exceeds DIVERGE_LIMIT and stops filling.
    """
    n = a.shape[0]
    x = np.zeros(n)
    for t in range(y.shape[0]):
        e = y[t] - c @ x
        e_out[t] = e
        x = a @ x + b @ e
        if n and np.max(np.abs(x)) > DIVERGE_LIMIT:
            return STATUS_DIVERGED
    return STATUS_OK


def kalman_loglik(a, c, q, s_cross, r, p0, y, e_out):
    """Time-varying Kalman recursion for an innovation-form system.

    State noise covariance q = B omega B', measurement noise r = omega and
    cross covariance s_cross = B omega.  Accumulates sum log det F_t and the
    innovation quadratic form; innovations are written to ``e_out``.
    Returns (logdet_sum, quad_sum, status).
    """
    t_len = y.shape[0]
    p = p0.copy()
    x = np.zeros(a.shape[0])
    logdet = 0.0
    quad = 0.0
    for t in range(t_len):
        e = y[t] - c @ x
        e_out[t] = e
        f = c @ p @ c.T + r
        try:
            lf = np.linalg.cholesky(f)
        except np.linalg.LinAlgError:
            return logdet, quad, STATUS_NOT_PSD
        z = np.linalg.solve(lf, e)
        quad += float(z @ z)
        logdet += 2.0 * float(np.log(np.diag(lf)).sum())
        g = a @ p @ c.T + s_cross
        k = np.linalg.solve(f, g.T).T
        x = a @ x + k @ e
        kl = k @ lf
        p = a @ p @ a.T + q - kl @ kl.T
        p = 0.5 * (p + p.T)
        if not np.isfinite(x).all():
            return logdet, quad, STATUS_DIVERGED
    return logdet, quad, STATUS_OK
