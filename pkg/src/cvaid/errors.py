"""Exception types shared across the package.

Domain/precondition violations raise plain ``ValueError``; these two classes
cover failures of the numerics themselves and of the estimation contracts.
"""


class NumericalError(RuntimeError):
    """A linear-algebra or conditioning failure (singular moment matrix,
    indefinite innovation covariance, ill-conditioned solve)."""


class EstimationError(RuntimeError):
    """An estimation step produced an unusable result, e.g. a selector matrix
    incompatible with the estimated observability matrix."""
