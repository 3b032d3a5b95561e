"""
Exception hierarchy shared by the solver core and the experiment harness.
"""
from typing import Optional


class SplitLabError(Exception):
    """Base class for every error raised by this project."""


class ConfigurationError(SplitLabError):
    """Invalid grid, scheme, weight or experiment configuration."""


class ExprSyntaxError(SplitLabError):
    """Expression source could not be parsed."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ExprEvalError(SplitLabError):
    """Expression evaluation failed (division by zero, missing coordinate)."""


class NonFiniteError(SplitLabError):
    """A grid function would contain NaN or Inf."""


class ValidationError(SplitLabError):
    """Operator or problem data violate a structural requirement."""


class TimeDependenceError(SplitLabError):
    """A time-independent scheme was given time-dependent coefficients."""


class InstabilityError(SplitLabError):
    """Sub-propagator solution norm blew up."""


class StepLimitError(SplitLabError):
    """Internal step budget of a sub-propagator was exhausted."""


class GridMismatchError(SplitLabError):
    """Trajectories or grid functions live on incompatible grids."""


class ExperimentError(SplitLabError):
    """A constituent run of an experiment failed."""

    def __init__(self, message: str, scheme: str, n: int):
        self.scheme = scheme
        self.n = n
        super().__init__(f"{scheme} at n={n}: {message}")
