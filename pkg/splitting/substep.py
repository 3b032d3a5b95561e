"""
=============================================================================
SUBSTEP - sub-propagators S^(r) for dv/dt = L_r v + f_r on one sub-interval
=============================================================================
Three solution paths share one discrete operator (problem.DiscreteOperator):

  spectral_const     exact per-mode exponential for coefficients constant in
                     x and t, with an exact or quadrature Duhamel term
  pointwise          zero-order operators decouple per node; exact nodal
                     exponential, or scipy solve_ivp when data vary in time
  implicit_adaptive  A-stable fourth-order SDIRK with step doubling and a
                     matrix-free GMRES stage solve, for everything else

The accuracy target of every path is substep_tol * (1 + ||u||_{0,2}).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConfigurationError, InstabilityError, StepLimitError, ValidationError
from .expr import Constant, Expr, as_expr
from .grid import Grid, GridFunction, sample, sample_values
from .problem import DiscreteOperator, OperatorSpec, SplitProblem, total_free_term, total_operator
from .trajectory import TimeGrid, Trajectory

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e8
PHI_SERIES_RADIUS = 1e-3
QUADRATURE_NODES = 8

Method = Literal["auto", "spectral_const", "pointwise", "implicit_adaptive"]


class PropagatorConfig(BaseModel):
    """Sub-propagator selection and accuracy settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Method = "auto"
    substep_tol: float = Field(default=1e-12, gt=0)
    max_internal_steps: int = Field(default=10**6, ge=1)


@dataclass(frozen=True)
class TimeMode:
    """How the coefficients of one sub-step are read off in time."""

    variant: Literal["as_given", "frozen_at", "scaled"] = "as_given"
    s: Optional[float] = None
    factor: int = 1

    def __post_init__(self):
        if self.factor < 1:
            raise ConfigurationError(f"scaling factor must be >= 1, got {self.factor}")
        if self.variant == "frozen_at" and self.s is None:
            raise ConfigurationError("frozen_at needs a freeze time")
        if self.variant != "scaled" and self.factor != 1:
            raise ConfigurationError(f"factor applies to scaled mode only, got {self.variant}")

    @classmethod
    def as_given(cls) -> "TimeMode":
        return cls()

    @classmethod
    def frozen_at(cls, s: float) -> "TimeMode":
        return cls(variant="frozen_at", s=float(s))

    @classmethod
    def scaled(cls, factor: int) -> "TimeMode":
        return cls(variant="scaled", factor=int(factor))

    @property
    def frozen(self) -> bool:
        return self.variant == "frozen_at"

    def clock(self, t: float) -> float:
        """Time at which data are sampled when the solution is at time t."""
        return self.s if self.frozen else t


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, with the Taylor series near zero."""
    z = np.asarray(z)
    small = np.abs(z) < PHI_SERIES_RADIUS
    safe = np.where(small, 1.0, z)
    series = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    return np.where(small, series, np.expm1(safe) / safe)


def _l2(values: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.spacing ** grid.dim * np.sum(np.abs(values) ** 2)))


# =============================================================================
# spectral_const
# =============================================================================

@lru_cache(maxsize=256)
def _spectral_factors(op: OperatorSpec, grid: Grid, tau: float, factor: int, t_coeff: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The symbol lambda, e^{lambda tau} and tau*phi1(lambda tau) for constant coefficients."""
    symbol = DiscreteOperator(op, grid, t_coeff, float(factor)).mean_symbol()
    z = symbol * tau
    decay = np.exp(z)
    duhamel = tau * phi1(z)
    for array in (symbol, decay, duhamel):
        array.setflags(write=False)
    return symbol, decay, duhamel


def _spectral(op: OperatorSpec, f: Expr, u: GridFunction, t0: float, tau: float, cfg: PropagatorConfig, mode: TimeMode) -> np.ndarray:
    grid = u.grid
    t_coeff = mode.clock(t0) if op.time_dependent else 0.0
    symbol, decay, duhamel = _spectral_factors(op, grid, tau, mode.factor, t_coeff)
    spectrum = decay * np.fft.fftn(u.values)
    if f == Constant(0.0):
        pass
    elif mode.frozen or not f.time_dependent:
        forcing = mode.factor * sample_values(f, mode.clock(t0), grid)
        spectrum = spectrum + duhamel * np.fft.fftn(forcing)
    else:
        spectrum = spectrum + _duhamel_quadrature(symbol, f, grid, t0, tau, cfg, mode.factor, _l2(u.values, grid))
    return np.fft.ifftn(spectrum).real


def _duhamel_quadrature(
    symbol: np.ndarray,
    f: Expr,
    grid: Grid,
    t0: float,
    tau: float,
    cfg: PropagatorConfig,
    factor: int,
    scale: float,
) -> np.ndarray:
    """Composite Gauss-Legendre rule for int_0^tau e^{lambda(tau - s)} f_hat(t0 + s) ds, panels doubled until converged."""
    nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
    target = cfg.substep_tol * (1.0 + scale)

    def rule(panels: int) -> np.ndarray:
        width = tau / panels
        acc = np.zeros(grid.shape, dtype=complex)
        for p in range(panels):
            left = p * width
            for node, weight in zip(nodes, weights):
                s = left + 0.5 * width * (node + 1.0)
                values = factor * sample_values(f, t0 + s, grid)
                acc += 0.5 * width * weight * np.exp(symbol * (tau - s)) * np.fft.fftn(values)
        return acc

    panels = 1
    previous = rule(panels)
    while True:
        panels *= 2
        if panels * QUADRATURE_NODES > cfg.max_internal_steps:
            raise StepLimitError(f"Duhamel quadrature needs more than {cfg.max_internal_steps} evaluations")
        current = rule(panels)
        change = _l2(np.fft.ifftn(current - previous).real, grid)
        if change <= target:
            logger.debug(f"Duhamel quadrature converged with {panels} panels")
            return current
        previous = current


# =============================================================================
# pointwise
# =============================================================================

def _pointwise(op: OperatorSpec, f: Expr, u: GridFunction, t0: float, tau: float, cfg: PropagatorConfig, mode: TimeMode) -> np.ndarray:
    grid = u.grid
    varies = not mode.frozen and (op.time_dependent or f.time_dependent)
    if not varies:
        a = mode.factor * sample_values(op.a0, mode.clock(t0), grid)
        forcing = mode.factor * sample_values(f, mode.clock(t0), grid)
        z = a * tau
        return np.exp(z) * u.values + tau * phi1(z) * forcing

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        a = sample_values(op.a0, t, grid).ravel()
        forcing = sample_values(f, t, grid).ravel()
        return mode.factor * (a * y + forcing)

    solution = solve_ivp(
        rhs,
        (t0, t0 + tau),
        u.values.ravel(),
        method="DOP853",
        rtol=cfg.substep_tol,
        atol=cfg.substep_tol,
    )
    if not solution.success:
        raise StepLimitError(f"pointwise integration failed: {solution.message}")
    logger.debug(f"Pointwise integration used {solution.nfev} evaluations")
    return solution.y[:, -1].reshape(grid.shape)


# =============================================================================
# implicit_adaptive
# =============================================================================

# Crouzeix's three-stage diagonally implicit scheme: A-stable, fourth order
SDIRK_GAMMA = 0.5 + math.cos(math.pi / 18.0) / math.sqrt(3.0)
_SDIRK_DELTA = 1.0 / (6.0 * (2.0 * SDIRK_GAMMA - 1.0) ** 2)
SDIRK_A = (
    (SDIRK_GAMMA, 0.0, 0.0),
    (0.5 - SDIRK_GAMMA, SDIRK_GAMMA, 0.0),
    (2.0 * SDIRK_GAMMA, 1.0 - 4.0 * SDIRK_GAMMA, SDIRK_GAMMA),
)
SDIRK_B = (_SDIRK_DELTA, 1.0 - 2.0 * _SDIRK_DELTA, _SDIRK_DELTA)
SDIRK_C = (SDIRK_GAMMA, 0.5, 1.0 - SDIRK_GAMMA)
SDIRK_ORDER = 4

STEP_SAFETY = 0.5
MIN_STEP_FRACTION = 1e-12
SOLVE_RTOL_FLOOR = 1e-14


class _UnconvergedSolve(Exception):
    """A stage solve stopped before GMRES reached its tolerance."""


class _DiagonallyImplicit:
    """Steps of dv/dt = A(t) v + g(t); each stage solves (I - gamma k A) Y = r matrix-free."""

    def __init__(self, op: OperatorSpec, f: Expr, grid: Grid, cfg: PropagatorConfig, mode: TimeMode):
        self.op = op
        self.f = f
        self.grid = grid
        self.cfg = cfg
        self.mode = mode
        self.time_varying = not mode.frozen and op.time_dependent
        self._frozen_operator: Optional[DiscreteOperator] = None

    def operator(self, t: float) -> DiscreteOperator:
        if not self.time_varying:
            if self._frozen_operator is None:
                self._frozen_operator = DiscreteOperator(self.op, self.grid, self.mode.clock(t), float(self.mode.factor))
            return self._frozen_operator
        return DiscreteOperator(self.op, self.grid, self.mode.clock(t), float(self.mode.factor))

    def forcing(self, t: float) -> np.ndarray:
        if self.f == Constant(0.0):
            return np.zeros(self.grid.shape)
        return self.mode.factor * sample_values(self.f, self.mode.clock(t), self.grid)

    def solve(self, operator: DiscreteOperator, rhs: np.ndarray, guess: np.ndarray, width: float, rtol: float) -> np.ndarray:
        shape = self.grid.shape

        def matvec(v: np.ndarray) -> np.ndarray:
            v = v.reshape(shape)
            return (v - width * operator(v)).ravel()

        denominator = 1.0 - width * operator.mean_symbol(second_order_only=True).real
        denominator = np.where(denominator > 0.5, denominator, 1.0)

        def precondition(r: np.ndarray) -> np.ndarray:
            return np.fft.ifftn(np.fft.fftn(r.reshape(shape)) / denominator).real.ravel()

        size = self.grid.size
        system = LinearOperator((size, size), matvec=matvec, dtype=float)
        preconditioner = LinearOperator((size, size), matvec=precondition, dtype=float)
        solution, info = gmres(system, rhs.ravel(), x0=guess.ravel(), rtol=rtol, atol=0.0, restart=50, maxiter=200, M=preconditioner)
        if info != 0:
            raise _UnconvergedSolve(f"GMRES returned info={info}")
        return solution.reshape(shape)

    def step(self, y: np.ndarray, t: float, k: float, rtol: float) -> np.ndarray:
        width = SDIRK_GAMMA * k
        slopes: List[np.ndarray] = []
        for row, c in zip(SDIRK_A, SDIRK_C):
            stage_time = t + c * k
            explicit = y
            for a, slope in zip(row, slopes):
                explicit = explicit + k * a * slope
            rhs = explicit + width * self.forcing(stage_time)
            stage = self.solve(self.operator(stage_time), rhs, explicit, width, rtol)
            # slope from the stage equation, so the solve residual is not multiplied by A
            slopes.append((stage - explicit) / width)
        result = y
        for b, slope in zip(SDIRK_B, slopes):
            result = result + k * b * slope
        return result


def _implicit(op: OperatorSpec, f: Expr, u: GridFunction, t0: float, tau: float, cfg: PropagatorConfig, mode: TimeMode) -> np.ndarray:
    """
    Adaptive implicit integration with step doubling.

    The local error estimate of every accepted step is held below
    STEP_SAFETY * substep_tol * (1 + ||u||_{0,2}) * k / tau, so the local
    errors over [t0, t0 + tau] add up to less than the sub-solve target.
    """
    grid = u.grid
    solver = _DiagonallyImplicit(op, f, grid, cfg, mode)
    y = np.array(u.values, dtype=float)
    scale = 1.0 + _l2(u.values, grid)
    limit = BLOWUP_FACTOR * scale
    rate = STEP_SAFETY * cfg.substep_tol * scale / tau
    t, t_end = t0, t0 + tau
    k = tau
    steps = accepted = retried = 0
    while t < t_end:
        k = min(k, t_end - t)
        if k <= MIN_STEP_FRACTION * tau:
            raise StepLimitError(f"implicit sub-solver step fell below {MIN_STEP_FRACTION * tau:.3g} at t={t:.6g}")
        steps += 3
        if steps > cfg.max_internal_steps:
            raise StepLimitError(f"implicit sub-solver exceeded {cfg.max_internal_steps} internal steps")
        rtol = max(cfg.substep_tol / 10.0 * k / tau, SOLVE_RTOL_FLOOR)
        try:
            full = solver.step(y, t, k, rtol)
            half = solver.step(solver.step(y, t, k / 2.0, rtol), t + k / 2.0, k / 2.0, rtol)
        except _UnconvergedSolve as e:
            logger.debug(f"Rejecting step k={k:.3g} at t={t:.6g}: {e}")
            retried += 1
            k = k / 2.0
            continue
        error = _l2(half - full, grid) / (2 ** SDIRK_ORDER - 1)
        target = rate * k
        if error <= target:
            # the last step must land on t_end exactly
            t = t_end if t + k >= t_end else t + k
            y = half
            accepted += 1
            if _l2(y, grid) > limit:
                raise InstabilityError(f"implicit sub-solution blew up at t={t:.6g}")
        growth = 2.0 if error == 0.0 else min(2.0, max(0.2, 0.9 * (target / error) ** (1.0 / SDIRK_ORDER)))
        k = k * growth
    if retried:
        logger.warning(f"GMRES did not converge in {retried} attempted steps; those steps were halved and retried")
    logger.debug(f"Implicit sub-solver: {accepted} accepted steps, {steps} stage sweeps")
    return y


# =============================================================================
# Public entry points
# =============================================================================

def _select(op: OperatorSpec, cfg: PropagatorConfig, mode: TimeMode) -> Callable:
    spectral_ok = not op.space_dependent and (mode.frozen or not op.time_dependent)
    pointwise_ok = op.zero_order_only
    if cfg.method == "spectral_const":
        if not spectral_ok:
            raise ValidationError("spectral_const needs coefficients constant in x and t over the sub-interval")
        return _spectral
    if cfg.method == "pointwise":
        if not pointwise_ok:
            raise ValidationError("pointwise propagation needs a zero-order operator")
        return _pointwise
    if cfg.method == "implicit_adaptive":
        return _implicit
    if spectral_ok:
        return _spectral
    if pointwise_ok:
        return _pointwise
    return _implicit


def propagate(
    op: OperatorSpec,
    f,
    u: GridFunction,
    t0: float,
    t1: float,
    cfg: Optional[PropagatorConfig] = None,
    mode: Optional[TimeMode] = None,
) -> GridFunction:
    """
    Solve dv/dt = L(t) v + f(t) on [t0, t1] with v(t0) = u.

    With mode frozen_at(s) the data are read at s throughout; with scaled(d)
    both the operator and the free term are multiplied by d.

    Args:
        op: Operator, same dimension as u's grid
        f: Free term (Expr or source string)
        u: Initial value at t0
        t0: Start time
        t1: End time, t1 >= t0
        cfg: Path selection and tolerance
        mode: as_given (default), frozen_at(s) or scaled(factor)

    Returns:
        v(t1) as a new GridFunction
    """
    cfg = cfg or PropagatorConfig()
    mode = mode or TimeMode.as_given()
    f = as_expr(f)
    if op.dim != u.grid.dim:
        raise ValidationError(f"operator is {op.dim}-d but the grid is {u.grid.dim}-d")
    if t1 < t0:
        raise ValidationError(f"propagation interval is reversed: [{t0}, {t1}]")
    tau = t1 - t0
    if tau == 0.0:
        return u
    if op.zero_order_only and op.a0 == Constant(0.0) and f == Constant(0.0):
        return u
    path = _select(op, cfg, mode)
    logger.debug(f"propagate via {path.__name__.lstrip('_')} over [{t0:.6g}, {t1:.6g}]")
    values = path(op, f, u, t0, tau, cfg, mode)
    if not np.all(np.isfinite(values)) or _l2(values, u.grid) > BLOWUP_FACTOR * (1.0 + _l2(u.values, u.grid)):
        raise InstabilityError(f"sub-solution norm exceeded {BLOWUP_FACTOR:.0e} times the initial norm on [{t0:.6g}, {t1:.6g}]")
    return GridFunction(u.grid, values)


def unsplit_reference(p: SplitProblem, grid: Grid, time_grid: TimeGrid, cfg: Optional[PropagatorConfig] = None) -> Trajectory:
    """
    Solve the full problem dv/dt = L v + f without splitting.

    Args:
        p: Split problem; its pieces are summed symbolically
        grid: Spatial grid
        time_grid: Nodes at which the solution is recorded
        cfg: Tolerance source; the path is always auto

    Returns:
        Trajectory of the unsplit solution on time_grid
    """
    cfg = (cfg or PropagatorConfig()).model_copy(update={"method": "auto"})
    op = total_operator(p)
    f = total_free_term(p)
    u = sample(p.u0, 0.0, grid)
    states = [u]
    for i in range(time_grid.n):
        u = propagate(op, f, u, time_grid.node(i), time_grid.node(i + 1), cfg)
        states.append(u)
    logger.info(f"Unsplit reference for {p.name} on n={time_grid.n} done")
    return Trajectory(time_grid=time_grid, states=tuple(states))
