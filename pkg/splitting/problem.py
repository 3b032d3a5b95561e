"""
=============================================================================
PROBLEM - operators, split problems, assumption checks, manufactured data
=============================================================================
An operator L = a^{ij} D_ij + a^i D_i + a is stored as coefficient
expressions. A split problem carries the pieces L_1..L_d1, the free terms
f_1..f_d1, the initial data u0 and the horizon T.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, ValidationError
from .expr import (
    ZERO,
    Constant,
    Expr,
    as_expr,
    differentiate,
    evaluate,
    minus,
    substitute,
    times,
    total,
)
from .grid import AXIS_LENGTH, Grid, GridFunction, derivative_values, fourier_multiplier, sample_values

logger = logging.getLogger(__name__)

ExprLike = Union[Expr, str, float, int]

SYMMETRY_TOL = 1e-13
PERIODICITY_TOL = 1e-10
DEFAULT_ELLIPTICITY_TOL = 1e-12


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Constant) and e.value == 0.0


@dataclass(frozen=True)
class OperatorSpec:
    """Second-order operator a2[i][j] D_ij + a1[i] D_i + a0 on a dim-dimensional torus."""

    dim: int
    a2: Tuple[Tuple[Expr, ...], ...]
    a1: Tuple[Expr, ...]
    a0: Expr

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"operator dimension must be 1 or 2, got {self.dim}")
        if len(self.a2) != self.dim or any(len(row) != self.dim for row in self.a2):
            raise ValidationError(f"a2 must be a {self.dim}x{self.dim} matrix")
        if len(self.a1) != self.dim:
            raise ValidationError(f"a1 must have {self.dim} entries")
        for coefficient in self.coefficients():
            for name in coefficient.variables:
                if name != "t" and int(name[1:]) > self.dim:
                    raise ValidationError(f"coefficient {coefficient} references {name} in dimension {self.dim}")

    @classmethod
    def build(
        cls,
        dim: int,
        a2: Optional[Sequence[Sequence[ExprLike]]] = None,
        a1: Optional[Sequence[ExprLike]] = None,
        a0: ExprLike = 0.0,
    ) -> "OperatorSpec":
        """Construct from strings or numbers; omitted coefficients are zero."""
        if a2 is None:
            a2 = [[0.0] * dim for _ in range(dim)]
        if a1 is None:
            a1 = [0.0] * dim
        return cls(
            dim=dim,
            a2=tuple(tuple(as_expr(c) for c in row) for row in a2),
            a1=tuple(as_expr(c) for c in a1),
            a0=as_expr(a0),
        )

    def coefficients(self) -> Iterator[Expr]:
        for row in self.a2:
            yield from row
        yield from self.a1
        yield self.a0

    @property
    def time_dependent(self) -> bool:
        return any(c.time_dependent for c in self.coefficients())

    @property
    def space_dependent(self) -> bool:
        return any(c.space_dependent for c in self.coefficients())

    @property
    def zero_order_only(self) -> bool:
        return all(_is_zero(c) for row in self.a2 for c in row) and all(_is_zero(c) for c in self.a1)


@dataclass(frozen=True)
class SplitProblem:
    """The splitting L = sum L_r, f = sum f_r with initial data u0 on [0, T]."""

    ops: Tuple[OperatorSpec, ...]
    free_terms: Tuple[Expr, ...]
    u0: Expr
    horizon_T: float
    name: str = "problem"

    def __post_init__(self):
        if len(self.ops) < 1:
            raise ValidationError("a split problem needs at least one operator")
        if len(self.free_terms) != len(self.ops):
            raise ValidationError(f"expected {len(self.ops)} free terms, got {len(self.free_terms)}")
        if len({op.dim for op in self.ops}) != 1:
            raise ValidationError("all operators must share one dimension")
        if not self.horizon_T > 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon_T}")

    @property
    def d1(self) -> int:
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].dim

    @property
    def time_dependent_coefficients(self) -> bool:
        return any(op.time_dependent for op in self.ops)

    @property
    def time_dependent(self) -> bool:
        return self.time_dependent_coefficients or any(f.time_dependent for f in self.free_terms)

    def validate(self, grid: Grid, times: Sequence[float] = (0.0,)) -> None:
        """Check symmetry and periodicity of every coefficient, free term and u0."""
        if grid.dim != self.dim:
            raise ValidationError(f"problem is {self.dim}-d but the grid is {grid.dim}-d")
        for op in self.ops:
            validate_operator(op, grid, times)
        for expr in (*self.free_terms, self.u0):
            check_periodic(expr, grid, times)


@dataclass(frozen=True)
class ManufacturedProblem:
    """A split problem whose forcing was derived so that `exact` solves it."""

    base: SplitProblem
    exact: Expr
    forcing: Expr

    @property
    def name(self) -> str:
        return self.base.name


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    min_eigenvalue: float
    tol: float
    worst_time: float


# =============================================================================
# Validation
# =============================================================================

def check_periodic(expr: Expr, grid: Grid, times: Sequence[float] = (0.0,)) -> None:
    """Compare samples on the faces x_k = 0 and x_k = 2*pi for every axis."""
    if not expr.space_dependent:
        return
    coordinates = grid.coordinates
    for axis in range(grid.dim):
        low = list(coordinates)
        high = list(coordinates)
        low[axis] = np.zeros(grid.shape)
        high[axis] = np.full(grid.shape, AXIS_LENGTH)
        for t in times:
            at_low = np.broadcast_to(evaluate(expr, t, low), grid.shape)
            at_high = np.broadcast_to(evaluate(expr, t, high), grid.shape)
            gap = float(np.max(np.abs(at_high - at_low)))
            if gap > PERIODICITY_TOL * (1.0 + float(np.max(np.abs(at_low)))):
                raise ValidationError(f"{expr} is not 2*pi-periodic in x{axis + 1} (gap {gap:.2e} at t={t})")


def validate_operator(op: OperatorSpec, grid: Grid, times: Sequence[float] = (0.0,)) -> None:
    """Symmetry of a2 and periodicity of all coefficients at the grid nodes."""
    if op.dim != grid.dim:
        raise ValidationError(f"operator is {op.dim}-d but the grid is {grid.dim}-d")
    for i in range(op.dim):
        for j in range(i + 1, op.dim):
            if op.a2[i][j] == op.a2[j][i]:
                continue
            for t in times:
                gap = np.max(np.abs(sample_values(op.a2[i][j], t, grid) - sample_values(op.a2[j][i], t, grid)))
                if gap > SYMMETRY_TOL:
                    raise ValidationError(f"a2 is not symmetric: a2[{i + 1}][{j + 1}] != a2[{j + 1}][{i + 1}] (gap {gap:.2e})")
    for coefficient in op.coefficients():
        check_periodic(coefficient, grid, times)


def check_ellipticity(
    op: OperatorSpec,
    grid: Grid,
    times: Sequence[float] = (0.0,),
    tol: float = DEFAULT_ELLIPTICITY_TOL,
) -> EllipticityReport:
    """
    Check a^{ij} lambda_i lambda_j >= 0 at every node and listed time.

    Degenerate operators (zero eigenvalues) pass.

    Returns:
        EllipticityReport with the smallest eigenvalue found
    """
    if tol < 0:
        raise ConfigurationError("ellipticity tolerance must be non-negative")
    lowest = np.inf
    worst_time = float(times[0]) if times else 0.0
    for t in times:
        matrix = np.empty(grid.shape + (op.dim, op.dim))
        for i in range(op.dim):
            for j in range(op.dim):
                matrix[..., i, j] = sample_values(op.a2[i][j], t, grid)
        smallest = float(np.min(np.linalg.eigvalsh(matrix)))
        if smallest < lowest:
            lowest, worst_time = smallest, float(t)
    passed = bool(lowest >= -tol)
    if not passed:
        logger.warning(f"Ellipticity check failed: min eigenvalue {lowest:.3e} at t={worst_time}")
    return EllipticityReport(passed=passed, min_eigenvalue=float(lowest), tol=tol, worst_time=worst_time)


# =============================================================================
# Operator algebra
# =============================================================================

def total_operator(p: SplitProblem) -> OperatorSpec:
    """Coefficient-wise symbolic sum L = L_1 + ... + L_d1."""
    if p.d1 == 1:
        return p.ops[0]
    dim = p.dim
    return OperatorSpec(
        dim=dim,
        a2=tuple(tuple(total([op.a2[i][j] for op in p.ops]) for j in range(dim)) for i in range(dim)),
        a1=tuple(total([op.a1[i] for op in p.ops]) for i in range(dim)),
        a0=total([op.a0 for op in p.ops]),
    )


def total_free_term(p: SplitProblem) -> Expr:
    return total(list(p.free_terms))


def scale_operator(op: OperatorSpec, c: float) -> OperatorSpec:
    """The operator c * L, built symbolically."""
    factor = Constant(float(c))
    return OperatorSpec(
        dim=op.dim,
        a2=tuple(tuple(times(factor, a) for a in row) for row in op.a2),
        a1=tuple(times(factor, a) for a in op.a1),
        a0=times(factor, op.a0),
    )


def strang_as_lie_split(p: SplitProblem) -> SplitProblem:
    """Three-way split (L1/2, L2, L1/2) whose Lie scheme reproduces Strang on (L1, L2)."""
    if p.d1 != 2:
        raise ValidationError(f"the Strang re-split needs d1 = 2, got {p.d1}")
    half = Constant(0.5)
    first, second = p.ops
    f1, f2 = p.free_terms
    return replace(
        p,
        ops=(scale_operator(first, 0.5), second, scale_operator(first, 0.5)),
        free_terms=(times(half, f1), f2, times(half, f1)),
        name=f"{p.name}:strang_resplit",
    )


def apply_symbolic(op: OperatorSpec, u: Expr) -> Expr:
    """L u as an expression (exact symbolic derivatives of u)."""
    names = [f"x{i + 1}" for i in range(op.dim)]
    gradient = [differentiate(u, name) for name in names]
    terms: List[Expr] = []
    for i in range(op.dim):
        for j in range(op.dim):
            if not _is_zero(op.a2[i][j]):
                terms.append(times(op.a2[i][j], differentiate(gradient[i], names[j])))
    for i in range(op.dim):
        if not _is_zero(op.a1[i]):
            terms.append(times(op.a1[i], gradient[i]))
    terms.append(times(op.a0, u))
    return total(terms)


class DiscreteOperator:
    """
    Spectral discretization of an operator with coefficients sampled at one time.

    The same object is used for apply_operator, for the implicit sub-solver and
    for the constant-coefficient Fourier symbol, so there is a single
    definition of the discrete operator.
    """

    def __init__(self, op: OperatorSpec, grid: Grid, t: float, factor: float = 1.0):
        if op.dim != grid.dim:
            raise ValidationError(f"operator is {op.dim}-d but the grid is {grid.dim}-d")
        self.grid = grid
        terms: Dict[Tuple[int, ...], Union[float, np.ndarray]] = {}

        def add(orders: Tuple[int, ...], coefficient: Expr) -> None:
            if _is_zero(coefficient):
                return
            if isinstance(coefficient, Constant):
                value: Union[float, np.ndarray] = factor * coefficient.value
            else:
                value = factor * sample_values(coefficient, t, grid)
            terms[orders] = terms[orders] + value if orders in terms else value

        for i in range(op.dim):
            for j in range(op.dim):
                orders = [0] * op.dim
                orders[i] += 1
                orders[j] += 1
                add(tuple(orders), op.a2[i][j])
        for i in range(op.dim):
            orders = [0] * op.dim
            orders[i] = 1
            add(tuple(orders), op.a1[i])
        add((0,) * op.dim, op.a0)
        self.terms = terms

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if not self.terms:
            return np.zeros(self.grid.shape)
        orders_list = list(self.terms)
        derivatives = derivative_values(values, self.grid, orders_list)
        result = None
        for orders, d in zip(orders_list, derivatives):
            term = self.terms[orders] * d
            result = term if result is None else result + term
        return result

    def mean_symbol(self, second_order_only: bool = False) -> np.ndarray:
        """Fourier symbol of the operator with every coefficient replaced by its mean."""
        symbol = np.zeros(self.grid.shape, dtype=complex)
        for orders, coefficient in self.terms.items():
            if second_order_only and sum(orders) != 2:
                continue
            symbol = symbol + float(np.mean(coefficient)) * fourier_multiplier(self.grid, orders)
        return symbol


def apply_operator(op: OperatorSpec, u: GridFunction, t: float) -> GridFunction:
    """
    Discrete action a^{ij}(t,.) D_ij u + a^i(t,.) D_i u + a(t,.) u.

    Args:
        op: Operator, same dimension as u's grid
        u: Grid function
        t: Time at which coefficients are sampled

    Returns:
        GridFunction holding L(t) u
    """
    return GridFunction(u.grid, DiscreteOperator(op, u.grid, t)(u.values))


def manufacture(
    exact: ExprLike,
    skeleton: SplitProblem,
    distribution: Optional[Sequence[float]] = None,
) -> ManufacturedProblem:
    """
    Derive the forcing that makes `exact` solve the split problem.

    f = d/dt exact - L exact is built symbolically and distributed as
    f_r = distribution[r] * f; u0 is `exact` at t = 0.

    Args:
        exact: Manufactured solution u(t, x)
        skeleton: Operators and horizon; its free terms are replaced
        distribution: Weights summing to one (default: everything on r = 1)

    Returns:
        ManufacturedProblem
    """
    exact = as_expr(exact)
    if distribution is None:
        distribution = [1.0] + [0.0] * (skeleton.d1 - 1)
    distribution = [float(w) for w in distribution]
    if len(distribution) != skeleton.d1:
        raise ConfigurationError(f"distribution needs {skeleton.d1} weights, got {len(distribution)}")
    if abs(sum(distribution) - 1.0) > 1e-12:
        raise ConfigurationError(f"distribution weights must sum to 1, got {sum(distribution)}")
    forcing = minus(differentiate(exact, "t"), apply_symbolic(total_operator(skeleton), exact))
    free_terms = tuple(times(Constant(w), forcing) for w in distribution)
    base = replace(skeleton, free_terms=free_terms, u0=substitute(exact, "t", Constant(0.0)))
    logger.debug(f"Manufactured forcing for {skeleton.name}: depth {forcing.depth}")
    return ManufacturedProblem(base=base, exact=exact, forcing=forcing)


def unforced(ops: Sequence[OperatorSpec], u0: ExprLike, horizon_T: float, name: str = "problem") -> SplitProblem:
    """Split problem with all free terms zero."""
    return SplitProblem(
        ops=tuple(ops),
        free_terms=tuple(ZERO for _ in ops),
        u0=as_expr(u0),
        horizon_T=float(horizon_T),
        name=name,
    )
