"""Exception types shared across the package."""


class EmshsError(Exception):
    """Base class for all package-specific errors."""


class DataError(EmshsError):
    """Malformed or unusable numeric input (shape, constant column, bad CSV)."""


class GraphInputError(EmshsError):
    """Malformed edge-list input (bad token, out-of-range node, self-loop)."""


class ConfigError(EmshsError):
    """Invalid run configuration (unknown key, non-positive hyperparameter)."""


class QuadratureError(EmshsError):
    """Numerical integration did not reach the requested tolerance."""


class NonConvergenceError(EmshsError):
    """Iterative solver exhausted its iteration budget.

    Carries the best iterate found so far and the residual at that point so
    callers can inspect or salvage the partial result.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
