"""Shared fixtures: the two workhorse data-generating processes.

``diff_noise_model``: first-differenced white noise y_t = eps_t - eps_{t-1},
realized as (A, B, C) = (0, -I, I); every population quantity has a closed
form.  ``ar1_base``/``ar1_diff``: a bivariate AR(1) with independent
innovations and its first difference, the over-differenced benchmark used
throughout the Monte Carlo tests.
"""

import numpy as np
import pytest

from cvaid import StateSpaceModel, spectral_radius


def make_diff_noise_model(s: int = 1, omega=None) -> StateSpaceModel:
    if omega is None:
        omega = np.eye(s)
    return StateSpaceModel(np.zeros((s, s)), -np.eye(s), np.eye(s), omega)


@pytest.fixture
def diff_noise_model() -> StateSpaceModel:
    return make_diff_noise_model(1)


@pytest.fixture
def ar1_base() -> StateSpaceModel:
    a = np.diag([0.7, 0.2])
    return StateSpaceModel(a, np.eye(2), a.copy(), np.eye(2))


@pytest.fixture
def ar1_diff() -> StateSpaceModel:
    return StateSpaceModel(np.diag([0.7, 0.2]), np.eye(2), np.diag([-0.3, -0.8]), np.eye(2))


def random_stable_model(rng: np.random.Generator, n: int, s: int,
                        target_rho: float = 0.7, max_rho_bar: float | None = None) -> StateSpaceModel:
    """Random system with spectral radius scaled to ``target_rho``.

    With ``max_rho_bar`` set, rejection-samples until the inverse filter's
    spectral radius is below that bound (strict minimum phase)."""
    for _ in range(500):
        a = rng.standard_normal((n, n))
        a *= target_rho / max(spectral_radius(a), 1e-12)
        b = rng.standard_normal((n, s))
        c = rng.standard_normal((s, n))
        raw = rng.standard_normal((s, s))
        omega = raw @ raw.T + 0.5 * np.eye(s)
        if max_rho_bar is not None:
            rho_bar = spectral_radius(a - b @ c)
            if rho_bar >= max_rho_bar:
                scale = 0.8 * max_rho_bar / rho_bar
                b = b * scale
                if spectral_radius(a - b @ c) >= max_rho_bar:
                    continue
        return StateSpaceModel(a, b, c, omega)
    raise AssertionError("failed to draw a random model with the requested properties")


def block_mean_se(block_values) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo mean and standard error from per-block estimates."""
    stacked = np.asarray(block_values, dtype=float)
    mean = stacked.mean(axis=0)
    se = stacked.std(axis=0, ddof=1) / np.sqrt(stacked.shape[0])
    return mean, se
