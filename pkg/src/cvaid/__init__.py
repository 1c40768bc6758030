"""State-space estimation for over-differenced time series.

Canonical variate analysis (CVA) subspace estimation, an exact population
oracle for its finite-horizon limits, Gaussian quasi-likelihood and
prediction-error comparison estimators, and a reproducible Monte Carlo
harness.  Hot filter loops run through a compiled kernel when available
(``cvaid.kernels.BACKEND`` says which backend is active).
"""

from .cva import (
    CvaEstimate,
    HankelMoments,
    aic_order,
    cva_fit,
    default_aic_pmax,
    default_selector,
    hankel_moments,
)
from .errors import EstimationError, NumericalError
from .likelihood import (
    ObjectiveConfig,
    OptimizeResult,
    ParamVector,
    PredictionErrors,
    barrier_penalty,
    gaussian_kalman_loglik,
    optimize,
    pack_params,
    prediction_errors,
    unpack_params,
)
from .montecarlo import (
    ExperimentConfig,
    McResult,
    RepRecord,
    derive_seed,
    kernel_density,
    normality_check,
    run_experiment,
    simulate_dgp,
)
from .oracle import (
    BlockToeplitz,
    PopulationLimit,
    bias_curve,
    build_gamma_p,
    lambda_min_gamma,
    population_kp,
    population_limits,
)
from .statespace import (
    CovarianceSequence,
    OverdiffSpec,
    StateSpaceModel,
    covariance_sequence,
    impulse_response,
    impulse_responses,
    is_minimum_phase,
    load_model,
    overdifference_model,
    save_model,
    solve_discrete_lyapunov,
    spectral_density,
    spectral_radius,
    state_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "BlockToeplitz",
    "CovarianceSequence",
    "CvaEstimate",
    "EstimationError",
    "ExperimentConfig",
    "HankelMoments",
    "McResult",
    "NumericalError",
    "ObjectiveConfig",
    "OptimizeResult",
    "OverdiffSpec",
    "ParamVector",
    "PopulationLimit",
    "PredictionErrors",
    "RepRecord",
    "StateSpaceModel",
    "aic_order",
    "barrier_penalty",
    "bias_curve",
    "build_gamma_p",
    "covariance_sequence",
    "cva_fit",
    "default_aic_pmax",
    "default_selector",
    "derive_seed",
    "gaussian_kalman_loglik",
    "hankel_moments",
    "impulse_response",
    "impulse_responses",
    "is_minimum_phase",
    "kernel_density",
    "lambda_min_gamma",
    "load_model",
    "normality_check",
    "optimize",
    "overdifference_model",
    "pack_params",
    "population_kp",
    "population_limits",
    "prediction_errors",
    "run_experiment",
    "save_model",
    "simulate_dgp",
    "solve_discrete_lyapunov",
    "spectral_density",
    "spectral_radius",
    "state_covariance",
    "unpack_params",
]
