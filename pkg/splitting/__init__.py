"""
Operator-splitting solvers for linear parabolic equations on the periodic torus.
"""
from .errors import (
    ConfigurationError,
    ExperimentError,
    ExprEvalError,
    ExprSyntaxError,
    GridMismatchError,
    InstabilityError,
    NonFiniteError,
    SplitLabError,
    StepLimitError,
    TimeDependenceError,
    ValidationError,
)
from .expr import Expr, differentiate, evaluate, parse, substitute, to_source
from .extrapolate import ExtrapolationWeights, combine, exact_weights, richardson_weights, strang_weights, vandermonde
from .grid import Grid, GridFunction, NormSpec, derivative, make_grid, norm, sample
from .problem import (
    EllipticityReport,
    ManufacturedProblem,
    OperatorSpec,
    SplitProblem,
    apply_operator,
    check_ellipticity,
    manufacture,
    scale_operator,
    strang_as_lie_split,
    total_operator,
    validate_operator,
)
from .schemes import (
    CompositionTable,
    FreezePoint,
    SchemeSpec,
    compose_step,
    lie_step,
    run_scheme,
    strang_step,
    strang_table,
    td_frozen_step,
    td_subinterval_step,
)
from .substep import PropagatorConfig, TimeMode, propagate, unsplit_reference
from .trajectory import TimeGrid, Trajectory

__all__ = [
    'ConfigurationError',
    'ExperimentError',
    'ExprEvalError',
    'ExprSyntaxError',
    'GridMismatchError',
    'InstabilityError',
    'NonFiniteError',
    'SplitLabError',
    'StepLimitError',
    'TimeDependenceError',
    'ValidationError',
    'Expr',
    'differentiate',
    'evaluate',
    'parse',
    'substitute',
    'to_source',
    'ExtrapolationWeights',
    'combine',
    'exact_weights',
    'richardson_weights',
    'strang_weights',
    'vandermonde',
    'Grid',
    'GridFunction',
    'NormSpec',
    'derivative',
    'make_grid',
    'norm',
    'sample',
    'EllipticityReport',
    'ManufacturedProblem',
    'OperatorSpec',
    'SplitProblem',
    'apply_operator',
    'check_ellipticity',
    'manufacture',
    'scale_operator',
    'strang_as_lie_split',
    'total_operator',
    'validate_operator',
    'CompositionTable',
    'FreezePoint',
    'SchemeSpec',
    'compose_step',
    'lie_step',
    'run_scheme',
    'strang_step',
    'strang_table',
    'td_frozen_step',
    'td_subinterval_step',
    'PropagatorConfig',
    'TimeMode',
    'propagate',
    'unsplit_reference',
    'TimeGrid',
    'Trajectory',
]
