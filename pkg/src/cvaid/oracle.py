"""Finite-horizon population analysis of the subspace state estimate.

Given exact model covariances, this module computes the block-Toeplitz
covariance Gamma_p of the stacked past, the population regression K_p of the
state on that past, and the pseudo-true system (A_p, B_p, C_p) obtained when
the estimator's regressions are carried out with population moments and the
truncated state x_t(p) = K_p Y_t^-.  For over-differenced processes these
limits are biased away from the generating system, with the A bias of order
p^-2 and the B bias of order p^-1; ``bias_curve`` tabulates exactly that.

Conditioning is never papered over: Gamma_p and Sigma_x solves fail loudly
above condition 1e14 instead of regularizing, because the decay of
lambda_min(Gamma_p) is itself the quantity under study.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .statespace import CovarianceSequence, StateSpaceModel, covariance_sequence, state_covariance

MAX_CONDITION = 1e14


@dataclass(frozen=True)
class BlockToeplitz:
    """Gamma_p = E Y_t^- (Y_t^-)' with Y_t^- = (y_{t-1}', ..., y_{t-p}')'.

    Block (i, j) equals gamma_{j-i} (gamma_{i-j}' below the diagonal); the
    dense matrix is materialized at construction.
    """

    cov: CovarianceSequence
    p: int
    matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.cov.max_lag < self.p - 1:
            raise ValueError(
                f"building Gamma_p for p = {self.p} needs lags up to {self.p - 1}, "
                f"covariance sequence has max_lag = {self.cov.max_lag}"
            )
        s = self.cov.s
        full = np.empty((self.p * s, self.p * s))
        for i in range(self.p):
            for j in range(self.p):
                full[i * s:(i + 1) * s, j * s:(j + 1) * s] = self.cov.gamma(j - i)
        full.setflags(write=False)
        object.__setattr__(self, "matrix", full)

    @property
    def dim(self) -> int:
        return self.p * self.cov.s


@dataclass(frozen=True)
class PopulationLimit:
    """Pseudo-true system and the moments behind it, at past horizon p.

    All quantities live in the generating model's own state basis (K_p is
    built from the model's x_t), so (a_p, b_p, c_p) compare directly to the
    model matrices.  ``delta_var`` is the covariance of the truncation error
    x_t - x_t(p).
    """

    p: int
    a_p: np.ndarray
    b_p: np.ndarray
    c_p: np.ndarray
    k_p: np.ndarray
    sigma_x: np.ndarray
    sigma_eps: np.ndarray
    delta_var: np.ndarray


def build_gamma_p(cov: CovarianceSequence, p: int) -> BlockToeplitz:
    """Assemble the ps x ps stacked-past covariance matrix."""
    return BlockToeplitz(cov, p)


def lambda_min_gamma(cov: CovarianceSequence, p: int) -> float:
    """Smallest eigenvalue of Gamma_p (positive for any finite p)."""
    gamma = build_gamma_p(cov, p)
    try:
        eigs = np.linalg.eigvalsh(gamma.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve of Gamma_p failed at p = {p}: {exc}") from exc
    return float(eigs[0])


def _check_condition(sym_matrix: np.ndarray, label: str, p: int) -> None:
    eigs = np.linalg.eigvalsh(sym_matrix)
    lo, hi = eigs[0], eigs[-1]
    if lo <= 0.0 or hi / lo > MAX_CONDITION:
        cond = np.inf if lo <= 0.0 else hi / lo
        raise NumericalError(
            f"{label} is numerically singular at p = {p} (condition {cond:.3g} > {MAX_CONDITION:.0e})"
        )


def _solve_spd(sym_matrix: np.ndarray, rhs: np.ndarray, label: str, p: int) -> np.ndarray:
    _check_condition(sym_matrix, label, p)
    try:
        cho = scipy.linalg.cho_factor(sym_matrix, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of {label} failed at p = {p}: {exc}") from exc
    return scipy.linalg.cho_solve(cho, rhs)


def _state_output_cross(model: StateSpaceModel) -> np.ndarray:
    """G = E x_{t+1} y_t' = A P C' + B omega."""
    p_state = state_covariance(model)
    return model.a @ p_state @ model.c.T + model.b @ model.omega


def population_kp(model: StateSpaceModel, p: int) -> np.ndarray:
    """Population regression coefficient of x_t on the stacked past Y_t^-.

    K_p = [G, A G, ..., A^{p-1} G] Gamma_p^{-1} with G = E x_{t+1} y_t';
    solved through a Cholesky factorization of Gamma_p after a condition
    check (no regularization).
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    cov = covariance_sequence(model, max(p - 1, 0))
    gamma = build_gamma_p(cov, p)
    g = _state_output_cross(model)
    blocks = np.empty((model.n, p * model.s))
    cur = g
    for j in range(p):
        blocks[:, j * model.s:(j + 1) * model.s] = cur
        cur = model.a @ cur
    return _solve_spd(gamma.matrix, blocks.T, "Gamma_p", p).T


def _gamma_shifted(cov: CovarianceSequence, p: int) -> np.ndarray:
    """E Y_{t+1}^- (Y_t^-)': block (i, j) is gamma_{j+1-i} (0-indexed)."""
    if cov.max_lag < p:
        raise ValueError(f"shifted Gamma_p for p = {p} needs lags up to {p}")
    s = cov.s
    full = np.empty((p * s, p * s))
    for i in range(p):
        for j in range(p):
            full[i * s:(i + 1) * s, j * s:(j + 1) * s] = cov.gamma(j + 1 - i)
    return full


def population_limits(model: StateSpaceModel, p: int) -> PopulationLimit:
    """Pseudo-true (A_p, B_p, C_p) and supporting moments at past horizon p.

    Mirrors the estimator's regressions with exact moments: C_p regresses
    y_t on x_t(p), A_p regresses x_{t+1}(p) on x_t(p), and B_p regresses
    x_{t+1}(p) on the projection residual eps_t(p) = y_t - C_p x_t(p),
    where x_t(p) = K_p Y_t^-.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    n, s = model.n, model.s
    p_state = state_covariance(model)
    cov = covariance_sequence(model, p)
    gamma0 = cov.gamma(0)

    if n == 0 or np.abs(model.b).max() == 0.0:
        # Zero state: x_t(p) is identically zero, so the regressions are
        # degenerate. Convention: all state-related limits are zero.
        return PopulationLimit(
            p=p,
            a_p=np.zeros((n, n)),
            b_p=np.zeros((n, s)),
            c_p=np.zeros((s, n)),
            k_p=np.zeros((n, p * s)),
            sigma_x=np.zeros((n, n)),
            sigma_eps=gamma0,
            delta_var=p_state - np.zeros((n, n)),
        )

    k_p = population_kp(model, p)
    gamma = build_gamma_p(cov, p)
    sigma_x = k_p @ gamma.matrix @ k_p.T
    sigma_x = 0.5 * (sigma_x + sigma_x.T)

    sigma_x1x = k_p @ _gamma_shifted(cov, p) @ k_p.T

    # E y_t (Y_t^-)' = [gamma_1, ..., gamma_p]
    ey_past = np.hstack([cov.gamma(j) for j in range(1, p + 1)])
    ey_x = ey_past @ k_p.T
    c_p = _solve_spd(sigma_x, ey_x.T, "Sigma_x", p).T

    sigma_eps = gamma0 - c_p @ sigma_x @ c_p.T
    sigma_eps = 0.5 * (sigma_eps + sigma_eps.T)

    # E Y_{t+1}^- y_t' stacks gamma_0', gamma_1', ..., gamma_{p-1}'
    e_past1_y = np.vstack([cov.gamma(j).T for j in range(p)])
    ex1_y = k_p @ e_past1_y
    ex1_eps = ex1_y - sigma_x1x @ c_p.T

    a_p = _solve_spd(sigma_x, sigma_x1x.T, "Sigma_x", p).T
    b_p = _solve_spd(sigma_eps, ex1_eps.T, "Sigma_eps", p).T

    return PopulationLimit(
        p=p,
        a_p=a_p,
        b_p=b_p,
        c_p=c_p,
        k_p=k_p,
        sigma_x=sigma_x,
        sigma_eps=sigma_eps,
        delta_var=p_state - sigma_x,
    )


def bias_curve(model: StateSpaceModel, p_list) -> list[tuple]:
    """Deviation of the pseudo-true system from the model across horizons.

    Returns rows (p, ||A_p - A||, ||B_p - B||, ||C_p - C||, p^2 ||A_p - A||,
    p ||B_p - B||, p ||C_p - C||) in ascending p, all Frobenius norms.
    """
    p_values = sorted(int(p) for p in p_list)
    if not p_values:
        raise ValueError("p_list must be non-empty")
    if p_values[0] < max(model.n, 1):
        raise ValueError(f"bias_curve needs p >= n = {model.n}, got p = {p_values[0]}")
    rows = []
    for p in p_values:
        lim = population_limits(model, p)
        da = float(np.linalg.norm(lim.a_p - model.a))
        db = float(np.linalg.norm(lim.b_p - model.b))
        dc = float(np.linalg.norm(lim.c_p - model.c))
        rows.append((p, da, db, dc, p * p * da, p * db, p * dc))
    return rows
