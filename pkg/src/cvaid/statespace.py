"""Linear state-space models in innovation form and their exact second moments.

The central object is the innovation-form system

    y_t = C x_t + eps_t,        x_{t+1} = A x_t + B eps_t,

with ``eps_t`` white noise of variance ``omega``.  The module provides
stability and minimum-phase diagnostics, a discrete Lyapunov solver, exact
autocovariance sequences, impulse responses, spectral densities, and the
block construction that first-differences selected orthonormal directions of
a strictly minimum-phase system (producing a stable system whose inverse
filter has unit-modulus eigenvalues).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError

# Spectral radii within this distance of 1 are treated as unstable so that
# Lyapunov solves stay well conditioned.
STABILITY_TOL = 1e-9


def _as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.shape != (rows, cols):
        raise ValueError(f"{name} must have shape {(rows, cols)}, got {m.shape}")
    m = np.array(m, copy=True)
    m.setflags(write=False)
    return m


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return 0.0
    try:
        eigs = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed for {m.shape} matrix: {exc}") from exc
    return float(np.max(np.abs(eigs)))


@dataclass(frozen=True)
class StateSpaceModel:
    """Innovation-form system (A, B, C) with innovation variance ``omega``.

    A is n x n and stable (spectral radius < 1), B is n x s, C is s x n and
    omega is s x s symmetric positive definite.  Arrays are copied and frozen
    at construction; instances are immutable and safe to share across threads.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    omega: np.ndarray
    n: int = field(init=False)
    s: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 2 or b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {b.shape}")
        s = b.shape[1]
        object.__setattr__(self, "a", _as_matrix(a, n, n, "A"))
        object.__setattr__(self, "b", _as_matrix(b, n, s, "B"))
        object.__setattr__(self, "c", _as_matrix(self.c, s, n, "C"))
        object.__setattr__(self, "omega", _as_matrix(self.omega, s, s, "omega"))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "s", s)
        if not np.allclose(self.omega, self.omega.T, atol=1e-12):
            raise ValueError("omega must be symmetric")
        if n > 0:
            rho = spectral_radius(self.a)
            if rho >= 1.0 - STABILITY_TOL:
                raise ValueError(f"A must be stable: spectral radius {rho:.6g} >= {1.0 - STABILITY_TOL}")
        if s > 0 and np.linalg.eigvalsh(self.omega).min() <= 0.0:
            raise ValueError("omega must be positive definite")

    def abar(self) -> np.ndarray:
        """The inverse-filter transition matrix A - B C."""
        return self.a - self.b @ self.c


@dataclass(frozen=True)
class CovarianceSequence:
    """Autocovariances gamma_j = E y_t y_{t-j}' for j = 0..max_lag.

    ``gammas`` is stored as a (max_lag + 1, s, s) array.
    """

    gammas: np.ndarray
    max_lag: int = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        if g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise ValueError(f"gammas must be (L+1, s, s), got shape {g.shape}")
        g = np.array(g, copy=True)
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "max_lag", g.shape[0] - 1)
        g0 = self.gamma(0)
        if not np.allclose(g0, g0.T, atol=1e-10 * (1.0 + np.abs(g0).max())):
            raise ValueError("gamma_0 must be symmetric")
        if np.linalg.eigvalsh(0.5 * (g0 + g0.T)).min() < -1e-10 * (1.0 + np.abs(g0).max()):
            raise ValueError("gamma_0 must be positive semidefinite")

    @property
    def s(self) -> int:
        return self.gammas.shape[1]

    def gamma(self, j: int) -> np.ndarray:
        """gamma_j for 0 <= j <= max_lag; negative j returns gamma_{-j}'."""
        if j < 0:
            return self.gamma(-j).T
        if j > self.max_lag:
            raise ValueError(f"lag {j} exceeds max_lag {self.max_lag}")
        return self.gammas[j]


@dataclass(frozen=True)
class OverdiffSpec:
    """Recipe for differencing ``c`` orthonormal directions of a base system.

    The base system must be strictly minimum-phase (its inverse filter is
    stable), so that all unit-modulus inverse-filter eigenvalues of the
    resulting system come from the differencing alone.
    """

    base: StateSpaceModel
    m_c: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m_c, dtype=float)
        if m.ndim != 2 or m.shape[0] != self.base.s:
            raise ValueError(f"m_c must have {self.base.s} rows, got shape {m.shape}")
        if not 0 < m.shape[1] <= self.base.s:
            raise ValueError(f"need 0 < c <= s, got c = {m.shape[1]}")
        if not np.allclose(m.T @ m, np.eye(m.shape[1]), atol=1e-12):
            raise ValueError("columns of m_c must be orthonormal to 1e-12")
        m = np.array(m, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "m_c", m)
        if not is_minimum_phase(self.base, strict=True):
            raise ValueError("base system must be strictly minimum-phase")

    @property
    def c_dirs(self) -> int:
        return self.m_c.shape[1]


def is_minimum_phase(model: StateSpaceModel, strict: bool = True) -> bool:
    """Whether the inverse filter is stable (strict) or at worst marginally so.

    Checks the spectral radius of A - BC against 1 with tolerance 1e-9.
    """
    tol = 1e-9
    rho = spectral_radius(model.abar()) if model.n > 0 else 0.0
    if strict:
        return rho < 1.0 - tol
    return rho <= 1.0 + tol


def solve_discrete_lyapunov(a, q) -> np.ndarray:
    """Solve P = A P A' + Q for symmetric Q and stable A.

    Uses the vectorized direct method, solving (I - A kron A) vec(P) = vec(Q);
    the O(n^6) cost is fine for the n <= 50 systems this package works with.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or q.shape != (n, n):
        raise ValueError(f"A and Q must both be {n} x {n}")
    if n == 0:
        return np.zeros((0, 0))
    if n > 50:
        raise ValueError(f"direct Lyapunov solver capped at n = 50, got n = {n}")
    rho = spectral_radius(a)
    if rho >= 1.0 - STABILITY_TOL:
        raise ValueError(f"Lyapunov equation requires a stable A, got spectral radius {rho:.6g}")
    lhs = np.eye(n * n) - np.kron(a, a)
    try:
        vec_p = np.linalg.solve(lhs, q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Lyapunov solve failed for n = {n}: {exc}") from exc
    p = vec_p.reshape(n, n)
    return 0.5 * (p + p.T)


def state_covariance(model: StateSpaceModel) -> np.ndarray:
    """Stationary state covariance E x_t x_t' = solve of P = A P A' + B omega B'."""
    return solve_discrete_lyapunov(model.a, model.b @ model.omega @ model.b.T)


def covariance_sequence(model: StateSpaceModel, max_lag: int) -> CovarianceSequence:
    """Exact autocovariances of the output process up to ``max_lag``.

    gamma_0 = C P C' + omega and gamma_j = C A^{j-1} G for j >= 1, where
    P is the stationary state covariance and G = A P C' + B omega is the
    state/output cross moment E x_{t+1} y_t'.
    """
    if max_lag < 0:
        raise ValueError(f"max_lag must be >= 0, got {max_lag}")
    p = state_covariance(model)
    s = model.s
    gammas = np.zeros((max_lag + 1, s, s))
    gammas[0] = model.c @ p @ model.c.T + model.omega
    g = model.a @ p @ model.c.T + model.b @ model.omega
    cur = g
    for j in range(1, max_lag + 1):
        gammas[j] = model.c @ cur
        cur = model.a @ cur
    return CovarianceSequence(gammas)


def overdifference_model(spec: OverdiffSpec) -> StateSpaceModel:
    """Difference the spec's directions, returning the (n + c)-state system.

    The output uses the block realization

        A = [[A0, 0], [Mc' C0, 0]],  B = [B0; Mc'],  C = [C0, -Mc],

    which is stable but not strictly minimum-phase (the inverse filter gains
    one unit-modulus eigenvalue per differenced direction).  The realization
    is generally non-minimal; its impulse responses, not the matrices, are
    the meaningful output.
    """
    base = spec.base
    nb, s, c = base.n, base.s, spec.c_dirs
    m = spec.m_c
    a = np.zeros((nb + c, nb + c))
    a[:nb, :nb] = base.a
    a[nb:, :nb] = m.T @ base.c
    b = np.vstack([base.b, m.T])
    c_mat = np.hstack([base.c, -m])
    return StateSpaceModel(a, b, c_mat, base.omega)


def impulse_response(model: StateSpaceModel, j: int) -> np.ndarray:
    """Transfer-function coefficient K_j = C A^{j-1} B for j >= 1.

    K_0 is the identity by convention and is not produced here.
    """
    if j < 1:
        raise ValueError(f"impulse response index must be >= 1, got {j}")
    return _impulse_responses_abc(model.a, model.b, model.c, j)[j - 1]


def impulse_responses(model: StateSpaceModel, horizon: int) -> np.ndarray:
    """Stacked impulse responses K_1..K_horizon as a (horizon, s, s) array."""
    return _impulse_responses_abc(model.a, model.b, model.c, horizon)


def _impulse_responses_abc(a, b, c, horizon: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    s = c.shape[0]
    out = np.zeros((horizon, s, b.shape[1]))
    cur = b
    for j in range(horizon):
        out[j] = c @ cur
        cur = a @ cur
    return out


def spectral_density(model: StateSpaceModel, omega_freq: float) -> np.ndarray:
    """Spectral density f(w) = k(e^{iw}) omega k(e^{iw})* / (2 pi).

    k(z) = I + z C (I - z A)^{-1} B is the model's transfer function.  The
    result is Hermitian PSD; for systems built by :func:`overdifference_model`
    its rank at w = 0 drops to s - c.
    """
    z = np.exp(1j * omega_freq)
    eye_n = np.eye(model.n)
    k = np.eye(model.s) + z * (model.c @ np.linalg.solve(eye_n - z * model.a, model.b))
    f = k @ model.omega @ k.conj().T / (2.0 * np.pi)
    return 0.5 * (f + f.conj().T)


def save_model(model: StateSpaceModel, path) -> None:
    """Write a model to the plain-text JSON format used by the CLI."""
    doc = {
        "n": model.n,
        "s": model.s,
        "A": model.a.tolist(),
        "B": model.b.tolist(),
        "C": model.c.tolist(),
        "omega": model.omega.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> StateSpaceModel:
    """Read a model from the plain-text JSON format used by the CLI."""
    doc = json.loads(Path(path).read_text())
    for key in ("n", "s", "A", "B", "C", "omega"):
        if key not in doc:
            raise ValueError(f"model file {path} is missing field '{key}'")
    model = StateSpaceModel(doc["A"], doc["B"], doc["C"], doc["omega"])
    if model.n != doc["n"] or model.s != doc["s"]:
        raise ValueError(
            f"model file {path} declares (n, s) = ({doc['n']}, {doc['s']}) "
            f"but matrices imply ({model.n}, {model.s})"
        )
    return model
