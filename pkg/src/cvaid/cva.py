"""Canonical variate analysis estimation of innovation-form state-space models.

The estimator regresses the stacked future Y_t^+ on the stacked past Y_t^-,
reduces the coefficient to rank n by a weighted SVD (canonical correlations:
inverse Cholesky factor of the future covariance on the left, Cholesky factor
of the past covariance on the right), fixes the state basis by a selector
normalization S_f O_f = I_n, and recovers (A, B, C, omega) by least-squares
regressions on the reconstructed state series.

Sample ranges: all first-stage moments run over the common range
t = p+1 .. T-f+1 (divisor = number of summands), so every moment matrix is
a genuine sample covariance; the A/B regressions drop the last time point
because they need the state at t+1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EstimationError, NumericalError

SELECTOR_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class HankelMoments:
    """Second moments of stacked future/past output vectors.

    syy_plus is fs x fs, syy_minus is ps x ps, s_plus_minus is fs x ps; all
    are averages over the common index range recorded in ``t_range``
    (1-indexed, inclusive) with divisor ``n_terms``.
    """

    syy_plus: np.ndarray
    syy_minus: np.ndarray
    s_plus_minus: np.ndarray
    f: int
    p: int
    t_range: tuple[int, int]
    n_terms: int


@dataclass(frozen=True)
class CvaEstimate:
    """Fitted system together with the first-stage decomposition.

    ``o_f_hat`` satisfies the selector normalization rows(o_f_hat) = I_n;
    ``singular_values`` are the weighted-SVD singular values (canonical
    correlations), non-increasing.
    """

    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    omega_hat: np.ndarray
    k_p_hat: np.ndarray
    o_f_hat: np.ndarray
    singular_values: np.ndarray
    f: int
    p: int
    n: int
    selector: np.ndarray = field(repr=False, default=None)

    def to_model(self):
        from .statespace import StateSpaceModel

        return StateSpaceModel(self.a_hat, self.b_hat, self.c_hat, self.omega_hat)


def _as_series(data) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError(f"data must be a T x s array, got shape {y.shape}")
    return y


def _stacked_past_future(y: np.ndarray, f: int, p: int):
    """Rows of Y_t^+ and Y_t^- for t = p+1 .. T-f+1 (1-indexed)."""
    t_len, s = y.shape
    n_terms = t_len - f - p + 1
    yplus = np.empty((n_terms, f * s))
    for i in range(f):
        yplus[:, i * s:(i + 1) * s] = y[p + i:p + i + n_terms]
    yminus = np.empty((n_terms, p * s))
    for j in range(1, p + 1):
        yminus[:, (j - 1) * s:j * s] = y[p - j:p - j + n_terms]
    return yplus, yminus, n_terms


def hankel_moments(data, f: int, p: int) -> HankelMoments:
    """Sample second moments of the stacked future and past at windows (f, p)."""
    y = _as_series(data)
    if f < 1 or p < 1:
        raise ValueError(f"f and p must be >= 1, got f = {f}, p = {p}")
    t_len = y.shape[0]
    min_t = f + p
    if t_len < min_t:
        raise ValueError(f"series too short: need T >= {min_t} for f = {f}, p = {p}, got T = {t_len}")
    yplus, yminus, n_terms = _stacked_past_future(y, f, p)
    return HankelMoments(
        syy_plus=yplus.T @ yplus / n_terms,
        syy_minus=yminus.T @ yminus / n_terms,
        s_plus_minus=yplus.T @ yminus / n_terms,
        f=f,
        p=p,
        t_range=(p + 1, t_len - f + 1),
        n_terms=n_terms,
    )


def default_aic_pmax(t_len: int) -> int:
    """Default search bound for the autoregressive order: floor(10 log10 T)."""
    return max(1, int(np.floor(10.0 * np.log10(t_len))))


def aic_order(data, p_max: int) -> int:
    """AIC-minimizing autoregressive order over k = 0..p_max.

    All candidate regressions share the sample range t = p_max+1 .. T so the
    criteria are comparable; AIC(k) = log det Sigma_k + 2 k s^2 / T_eff.
    Ties break toward the smaller order.
    """
    y = _as_series(data)
    t_len, s = y.shape
    if p_max < 0:
        raise ValueError(f"p_max must be >= 0, got {p_max}")
    if p_max == 0:
        return 0
    if t_len <= 2 * s * p_max:
        raise ValueError(f"series too short for p_max = {p_max}: need T > {2 * s * p_max}")
    t_eff = t_len - p_max
    targets = y[p_max:]
    lagged = np.empty((t_eff, s * p_max))
    for j in range(1, p_max + 1):
        lagged[:, (j - 1) * s:j * s] = y[p_max - j:t_len - j]

    gram = lagged.T @ lagged
    cross = lagged.T @ targets
    yy = targets.T @ targets

    best_k, best_aic = 0, np.inf
    for k in range(p_max + 1):
        if k == 0:
            resid_cov = yy / t_eff
        else:
            d = k * s
            try:
                coef = np.linalg.solve(gram[:d, :d], cross[:d])
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"singular regressor moment at AR order {k}: {exc}") from exc
            resid_cov = (yy - cross[:d].T @ coef) / t_eff
        sign, logdet = np.linalg.slogdet(resid_cov)
        if sign <= 0:
            raise NumericalError(f"residual covariance not positive definite at AR order {k}")
        aic = logdet + 2.0 * k * s * s / t_eff
        if aic < best_aic:
            best_k, best_aic = k, aic
    return best_k


def default_selector(f: int, n: int, s: int) -> np.ndarray:
    """Row indices picking the first n rows of an fs-row observability matrix."""
    if f * s < n:
        raise ValueError(f"selector needs f s >= n, got f s = {f * s}, n = {n}")
    return np.arange(n)


def cva_fit(data, f: int, p: int, n: int, s_f=None) -> CvaEstimate:
    """Fit an order-n system by canonical variate analysis with windows (f, p).

    ``s_f`` gives the selector rows fixing the state basis (default: first n
    rows).  Raises :class:`EstimationError` when the selector block of the
    estimated observability matrix is too ill-conditioned to normalize.
    """
    y = _as_series(data)
    s = y.shape[1]
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > min(f * s, p * s):
        raise ValueError(f"n = {n} exceeds min(f s, p s) = {min(f * s, p * s)}")
    sel = default_selector(f, n, s) if s_f is None else np.asarray(s_f, dtype=int)
    if sel.shape != (n,) or sel.min() < 0 or sel.max() >= f * s:
        raise ValueError(f"selector must list n = {n} row indices below f s = {f * s}")
    min_t = f + p + 10
    if y.shape[0] < min_t:
        raise ValueError(f"series too short to fit: need T >= {min_t} for f = {f}, p = {p}, got T = {y.shape[0]}")

    mom = hankel_moments(y, f, p)
    yplus, yminus, n_terms = _stacked_past_future(y, f, p)

    try:
        l_plus = np.linalg.cholesky(mom.syy_plus)
        l_minus = np.linalg.cholesky(mom.syy_minus)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of a Hankel moment failed (f = {f}, p = {p}): {exc}") from exc

    beta = scipy.linalg.cho_solve((l_minus, True), mom.s_plus_minus.T).T

    # weighted coefficient L_+^{-1} beta L_-, whose singular values are the
    # canonical correlations between stacked future and past
    m = scipy.linalg.solve_triangular(l_plus, mom.s_plus_minus, lower=True)
    m = scipy.linalg.solve_triangular(l_minus, m.T, lower=True).T

    u, sv, _ = np.linalg.svd(m, full_matrices=False)
    if n < sv.size and sv[n - 1] - sv[n] <= 1e-12 * max(sv[0], 1e-300):
        warnings.warn(
            f"singular values {n} and {n + 1} are tied (sigma = {sv[n - 1]:.6g}); "
            "truncation keeps the first columns as returned by the SVD",
            RuntimeWarning,
        )

    o_f = l_plus @ (u[:, :n] * np.sqrt(sv[:n]))
    sel_block = o_f[sel, :]
    if np.linalg.cond(sel_block) > SELECTOR_MAX_CONDITION:
        raise EstimationError("selector incompatible with estimated observability matrix")
    o_f = np.linalg.solve(sel_block.T, o_f.T).T

    k_p = np.linalg.solve(o_f.T @ o_f, o_f.T @ beta)

    # state series on the common range and the three output regressions
    x = yminus @ k_p.T
    y_range = yplus[:, :s]
    sxx = x.T @ x / n_terms
    try:
        c_hat = np.linalg.solve(sxx, (y_range.T @ x / n_terms).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular state moment in the C regression: {exc}") from exc
    resid = y_range - x @ c_hat.T
    omega_hat = resid.T @ resid / n_terms

    x_now, x_next, resid_now = x[:-1], x[1:], resid[:-1]
    m_terms = n_terms - 1
    sxx0 = x_now.T @ x_now / m_terms
    see0 = resid_now.T @ resid_now / m_terms
    try:
        a_hat = np.linalg.solve(sxx0, (x_next.T @ x_now / m_terms).T).T
        b_hat = np.linalg.solve(see0, (x_next.T @ resid_now / m_terms).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular moment in the A/B regressions: {exc}") from exc

    return CvaEstimate(
        a_hat=a_hat,
        b_hat=b_hat,
        c_hat=c_hat,
        omega_hat=0.5 * (omega_hat + omega_hat.T),
        k_p_hat=k_p,
        o_f_hat=o_f,
        singular_values=sv,
        f=f,
        p=p,
        n=n,
        selector=sel,
    )
