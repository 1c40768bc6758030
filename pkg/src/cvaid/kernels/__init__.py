"""Filter kernels with a compiled fast path and a pure-Python fallback.

The Cython extension is used when it imported successfully; otherwise (or
when the CVAID_PURE_PYTHON environment variable is set to a non-empty value)
the NumPy reference implementation takes over.  ``BACKEND`` records which one
is active.  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from . import _filters_py

if os.environ.get("CVAID_PURE_PYTHON"):
    _impl = _filters_py
    BACKEND = "python"
else:
    try:
        from . import _filters as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _filters_py
        BACKEND = "python"

DIVERGE_LIMIT = _filters_py.DIVERGE_LIMIT

STATUS_OK = _filters_py.STATUS_OK
STATUS_DIVERGED = _filters_py.STATUS_DIVERGED
STATUS_NOT_PSD = _filters_py.STATUS_NOT_PSD


def _c2d(m) -> np.ndarray:
    return np.ascontiguousarray(m, dtype=np.float64)


def simulate_ss(a, b, c, eps, return_states: bool = False):
    """Run y_t = C x_t + eps_t, x_{t+1} = A x_t + B eps_t from x_1 = 0."""
    a, b, c, eps = _c2d(a), _c2d(b), _c2d(c), _c2d(eps)
    y = np.empty_like(eps)
    if return_states:
        x = np.empty((eps.shape[0], a.shape[0]))
        _impl.simulate_ss_states(a, b, c, eps, y, x)
        return y, x
    _impl.simulate_ss(a, b, c, eps, y)
    return y


def pem_filter(a, b, c, y):
    """Inverse-system residuals from x_1 = 0; returns (residuals, diverged)."""
    a, b, c, y = _c2d(a), _c2d(b), _c2d(c), _c2d(y)
    e = np.empty_like(y)
    status = _impl.pem_filter(a, b, c, y, e)
    return e, status == STATUS_DIVERGED


def kalman_loglik(a, c, q, s_cross, r, p0, y):
    """Kalman recursion; returns (logdet_sum, quad_sum, innovations, ok)."""
    a, c, q = _c2d(a), _c2d(c), _c2d(q)
    s_cross, r, p0, y = _c2d(s_cross), _c2d(r), _c2d(p0), _c2d(y)
    e = np.empty_like(y)
    logdet, quad, status = _impl.kalman_loglik(a, c, q, s_cross, r, p0, y, e)
    return logdet, quad, e, status == STATUS_OK
