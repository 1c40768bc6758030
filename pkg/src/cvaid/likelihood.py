"""Gaussian quasi-likelihood and prediction-error estimation with barriers.

Two comparison estimators, both initialized from a subspace estimate:

* qMLE maximizes the exact Gaussian likelihood of the innovation-form model,
  evaluated by a time-varying Kalman filter with stationary initialization
  and the exact process/measurement noise cross term.  Stability and the
  minimum-phase property are kept by a log barrier at spectral radius 0.99.
* PEM minimizes the concentrated Gaussian objective of the inverse system
  started at x_1 = 0 ((T/2) log det of the residual sample covariance), with
  the stability barrier only; systems far from minimum phase penalize
  themselves through filter divergence.

The parameter vector holds all entries of (A, B, C); omega is concentrated
out.  Impulse responses, the quantities reported downstream, are invariant
to the resulting overparameterization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError
from .statespace import StateSpaceModel, spectral_radius

KINDS = ("qmle", "pem")
SHRINK_MARGIN = 0.005
FD_STEP = 1e-6
ARMIJO_C = 1e-4
MIN_STEP = 1e-12


@dataclass(frozen=True)
class ObjectiveConfig:
    """Estimation objective selector plus barrier and optimizer settings.

    ``barrier_weight`` of None resolves to 1e-4 * T when data are seen (a
    fixed weight, no continuation schedule).
    """

    kind: str
    barrier_radius: float = 0.99
    barrier_weight: float | None = None
    max_iters: int = 200
    gradient_tol: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 < self.barrier_radius < 1.0:
            raise ValueError(f"barrier_radius must be in (0, 1), got {self.barrier_radius}")
        if self.barrier_weight is not None and self.barrier_weight <= 0.0:
            raise ValueError("barrier_weight must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.gradient_tol <= 0.0:
            raise ValueError("gradient_tol must be positive")

    def resolved_weight(self, t_len: int) -> float:
        return self.barrier_weight if self.barrier_weight is not None else 1e-4 * t_len


@dataclass(frozen=True)
class ParamVector:
    """Flat row-major encoding of (A, B, C); length n^2 + 2 n s."""

    theta: np.ndarray
    n: int
    s: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        expected = self.n * self.n + 2 * self.n * self.s
        if theta.size != expected:
            raise ValueError(f"theta must have length {expected}, got {theta.size}")
        object.__setattr__(self, "theta", theta)


def pack_params(a, b, c) -> ParamVector:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    n, s = b.shape
    return ParamVector(np.concatenate([a.ravel(), b.ravel(), c.ravel()]), n, s)


def unpack_params(pv: ParamVector):
    n, s = pv.n, pv.s
    a = pv.theta[:n * n].reshape(n, n)
    b = pv.theta[n * n:n * n + n * s].reshape(n, s)
    c = pv.theta[n * n + n * s:].reshape(s, n)
    return a, b, c


@dataclass(frozen=True)
class PredictionErrors:
    """Inverse-system residuals; ``diverged`` marks state overflow."""

    residuals: np.ndarray
    diverged: bool


def prediction_errors(model: StateSpaceModel, data) -> PredictionErrors:
    """Residuals of the inverse system run from x_1 = 0.

    e_t = y_t - C x_t, x_{t+1} = A x_t + B e_t.  A need not give a stable
    inverse filter; once the state exceeds 1e12 in max norm the result is
    flagged diverged (values after that point are not meaningful).
    """
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    e, diverged = kernels.pem_filter(model.a, model.b, model.c, y)
    return PredictionErrors(e, diverged)


def _lyap_raw(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Stationary covariance solve without the public stability re-check;
    callers guarantee a stable A (the barrier enforces it)."""
    n = a.shape[0]
    kron = np.einsum("ij,kl->ikjl", a, a).reshape(n * n, n * n)
    p = np.linalg.solve(np.eye(n * n) - kron, q.reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def _kalman_pieces(a, b, c, omega, data):
    """(sum log det F_t, innovation quadratic form, innovations, ok)."""
    q = b @ omega @ b.T
    s_cross = b @ omega
    p0 = _lyap_raw(a, q)
    return kernels.kalman_loglik(a, c, q, s_cross, omega, p0, data)


def gaussian_kalman_loglik(model: StateSpaceModel, data) -> float:
    """Exact Gaussian log-likelihood, up to the additive 2 pi constant.

    Runs the time-varying Kalman filter for the innovation-form model with
    x_{1|0} = 0 and stationary P_{1|0} and returns
    -(1/2) sum_t [log det F_t + e_t' F_t^{-1} e_t].
    """
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    logdet, quad, _, ok = _kalman_pieces(model.a, model.b, model.c, model.omega, y)
    if not ok:
        raise NumericalError("Kalman recursion failed: innovation covariance not positive definite")
    return -0.5 * (logdet + quad)


def _rho(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def _barrier_value(a, abar, kind: str, radius: float, weight: float) -> float:
    rho_a = _rho(a)
    if rho_a >= radius:
        return np.inf
    value = -weight * np.log(radius - rho_a)
    if kind == "qmle":
        rho_abar = _rho(abar)
        if rho_abar >= radius:
            return np.inf
        value -= weight * np.log(radius - rho_abar)
    return value


def barrier_penalty(model: StateSpaceModel, config: ObjectiveConfig) -> float:
    """Log-barrier value for the model under the config's constraint set.

    Infinite when a constrained spectral radius reaches the barrier radius.
    qMLE constrains both A and A - BC; PEM constrains A only.  A config
    without an explicit weight uses unit weight here (the data-dependent
    default applies inside :func:`optimize`).
    """
    weight = config.barrier_weight if config.barrier_weight is not None else 1.0
    return _barrier_value(model.a, model.abar(), config.kind, config.barrier_radius, weight)


@dataclass(frozen=True)
class OptimizeResult:
    """Fitted model plus optimizer diagnostics."""

    model: StateSpaceModel
    converged: bool
    iterations: int
    objective: float
    shrink_kappa: float
    n_evals: int = 0
    message: str = ""


def _shrink_to_feasible(a, b, c, kind: str, radius: float):
    """Scale (A, B) into the barrier's open region when the init violates it.

    Returns (a, b, kappa); kappa = 1 when no shrink was needed.  The scaling
    moves both spectral radii to at most radius - SHRINK_MARGIN, using that
    rho(kappa A) = kappa rho(A) and kappa A - kappa B C = kappa (A - B C).
    """
    rho_a = spectral_radius(a)
    rho_abar = spectral_radius(a - b @ c)
    violated = rho_a >= radius or (kind == "qmle" and rho_abar >= radius)
    if not violated:
        return a, b, 1.0
    worst = max(rho_a, rho_abar)
    kappa = (radius - SHRINK_MARGIN) / worst
    kappa = min(1.0, kappa)
    return kappa * a, kappa * b, kappa


def _central_fd_grad(fn, theta: np.ndarray, f_at_theta: float) -> np.ndarray:
    """Central differences with one-sided fallback at barrier boundaries."""
    g = np.empty(theta.size)
    for i in range(theta.size):
        h = FD_STEP * (1.0 + abs(theta[i]))
        up = theta.copy()
        up[i] += h
        dn = theta.copy()
        dn[i] -= h
        fp = fn(up)
        fm = fn(dn)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * h)
        elif np.isfinite(fp):
            g[i] = (fp - f_at_theta) / h
        elif np.isfinite(fm):
            g[i] = (f_at_theta - fm) / h
        else:
            g[i] = 0.0
    return g


def optimize(data, init: StateSpaceModel, config: ObjectiveConfig) -> OptimizeResult:
    """Quasi-Newton minimization of the barrier-augmented objective.

    The objective is the concentrated negative Gaussian log-likelihood plus
    barrier: for qMLE through the Kalman filter, for PEM through the
    inverse-system residual covariance ((T/2) log det of it, the x_1 = 0
    concentrated likelihood).  Gradients are central finite differences with
    step 1e-6 (1 + |theta_i|).  Terminates on gradient norm below
    ``config.gradient_tol``, on ``config.max_iters``, or when backtracking
    finds no descent (best-so-far returned, converged = False).  The returned
    model carries omega from the residual sample covariance at the solution.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    t_len, s = y.shape
    n = init.n
    radius = config.barrier_radius
    weight = config.resolved_weight(t_len)

    a0, b0, kappa = _shrink_to_feasible(init.a, init.b, init.c, config.kind, radius)
    c0 = init.c
    omega0 = init.omega

    n_evals = 0
    nn, ns = n * n, n * s

    def split(theta: np.ndarray):
        return (
            theta[:nn].reshape(n, n),
            theta[nn:nn + ns].reshape(n, s),
            theta[nn + ns:].reshape(s, n),
        )

    if config.kind == "qmle":

        def objective(theta: np.ndarray) -> float:
            nonlocal n_evals
            n_evals += 1
            a, b, c = split(theta)
            pen = _barrier_value(a, a - b @ c, "qmle", radius, weight)
            if not np.isfinite(pen):
                return np.inf
            logdet, quad, _, ok = _kalman_pieces(a, b, c, omega0, y)
            if not ok:
                return np.inf
            # concentrate the innovation scale: c_hat = quad / (T s)
            c_hat = quad / (t_len * s)
            if not np.isfinite(c_hat) or c_hat <= 0.0:
                return np.inf
            return 0.5 * (t_len * s * np.log(c_hat) + logdet) + pen

    else:

        def objective(theta: np.ndarray) -> float:
            nonlocal n_evals
            n_evals += 1
            a, b, c = split(theta)
            pen = _barrier_value(a, a - b @ c, "pem", radius, weight)
            if not np.isfinite(pen):
                return np.inf
            e, diverged = kernels.pem_filter(a, b, c, y)
            if diverged:
                return np.inf
            sig = e.T @ e / t_len
            sign, logdet = np.linalg.slogdet(sig)
            if sign <= 0 or not np.isfinite(logdet):
                return np.inf
            # concentrated Gaussian objective of the x_1 = 0 model, up to
            # constants; the T/2 scale keeps the barrier weight schedule
            # (1e-4 T) asymptotically negligible, as for qMLE
            return 0.5 * t_len * logdet + pen

    theta = pack_params(a0, b0, c0).theta
    f_cur = objective(theta)
    if not np.isfinite(f_cur):
        raise NumericalError("objective not finite at the (shrunk) initializer")

    if config.max_iters == 0:
        model = StateSpaceModel(a0, b0, c0, init.omega)
        return OptimizeResult(model, False, 0, f_cur, kappa, n_evals, "max_iters = 0")

    dim = theta.size
    h_inv = np.eye(dim)
    converged = False
    message = "max iterations reached"
    g = _central_fd_grad(objective, theta, f_cur)
    iterations = 0

    while iterations < config.max_iters:
        gnorm = float(np.linalg.norm(g))
        if gnorm < config.gradient_tol:
            converged = True
            message = "gradient tolerance reached"
            break
        direction = -h_inv @ g
        slope = float(direction @ g)
        if slope >= 0.0:
            h_inv = np.eye(dim)
            direction = -g
            slope = -gnorm * gnorm
        alpha = 1.0
        f_new = np.inf
        while alpha >= MIN_STEP:
            f_new = objective(theta + alpha * direction)
            if f_new < f_cur + ARMIJO_C * alpha * slope:
                break
            alpha *= 0.5
        else:
            message = "line search found no descent"
            break
        step = alpha * direction
        theta_new = theta + step
        g_new = _central_fd_grad(objective, theta_new, f_new)
        y_vec = g_new - g
        ys = float(y_vec @ step)
        if ys > 1e-10 * np.linalg.norm(y_vec) * np.linalg.norm(step):
            hy = h_inv @ y_vec
            yhy = float(y_vec @ hy)
            h_inv = (
                h_inv
                + ((ys + yhy) / ys**2) * np.outer(step, step)
                - (np.outer(hy, step) + np.outer(step, hy)) / ys
            )
        theta, f_cur, g = theta_new, f_new, g_new
        iterations += 1

    a, b, c = split(theta)
    if config.kind == "qmle":
        _, _, resid, ok = _kalman_pieces(a, b, c, omega0, y)
        if not ok:
            raise NumericalError("Kalman recursion failed at the optimizer solution")
    else:
        resid, diverged = kernels.pem_filter(a, b, c, y)
        if diverged:
            raise NumericalError("prediction-error filter diverged at the optimizer solution")
    omega_hat = resid.T @ resid / t_len
    omega_hat = 0.5 * (omega_hat + omega_hat.T)
    model = StateSpaceModel(a, b, c, omega_hat)
    return OptimizeResult(model, converged, iterations, f_cur, kappa, n_evals, message)
