"""
=============================================================================
SCHEMES - splitting-up trajectories on the time grid T_n
=============================================================================
Lie, Strang and general compositions advance one clock per operator: piece r
starts each step at t_i and is moved forward only by the widths it is given.
For time-independent data the clocks are immaterial; with time-dependent free
terms this is the splitting of the system augmented by those clocks.
The td_subinterval and td_frozen variants handle time-dependent coefficients.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Literal, Optional, Tuple

from .errors import ConfigurationError, TimeDependenceError
from .grid import Grid, GridFunction, sample
from .problem import SplitProblem
from .substep import PropagatorConfig, TimeMode, propagate
from .trajectory import TimeGrid, Trajectory

logger = logging.getLogger(__name__)

SchemeKind = Literal["lie", "strang", "composition", "td_subinterval", "td_frozen"]
SCHEME_KINDS: Tuple[str, ...] = ("lie", "strang", "composition", "td_subinterval", "td_frozen")


@dataclass(frozen=True)
class FreezePoint:
    """Where td_frozen reads the coefficients of piece r during [t_i, t_{i+1}]."""

    kind: Literal["right_all", "left_for_first_j"] = "right_all"
    j: int = 0

    def __post_init__(self):
        if self.kind not in ("right_all", "left_for_first_j"):
            raise ConfigurationError(f"unknown freeze point '{self.kind}'")
        if self.j < 0:
            raise ConfigurationError(f"freeze prefix must be >= 0, got {self.j}")
        if self.kind == "right_all" and self.j != 0:
            raise ConfigurationError("right_all takes no prefix")

    @classmethod
    def right_all(cls) -> "FreezePoint":
        return cls()

    @classmethod
    def left_for_first_j(cls, j: int) -> "FreezePoint":
        return cls(kind="left_for_first_j", j=int(j))

    def freeze_time(self, r: int, t_i: float, t_next: float) -> float:
        """Freeze time of piece r (1-based)."""
        if self.kind == "left_for_first_j" and r <= self.j:
            return t_i
        return t_next

    @property
    def label(self) -> str:
        return "right_all" if self.kind == "right_all" else f"left_for_first_j({self.j})"


@dataclass(frozen=True)
class CompositionTable:
    """
    Coefficients c[i][r] of prod_i prod_r S^(r)_{c[i][r] delta}.

    Rows are applied first to last. With alternate=True every second row
    sweeps the pieces in reverse, which is how palindromic tables are written.
    """

    rows: Tuple[Tuple[float, ...], ...]
    alternate: bool = False

    def __post_init__(self):
        rows = tuple(tuple(float(c) for c in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows or not rows[0]:
            raise ConfigurationError("composition table must have at least one row and one column")
        if len({len(row) for row in rows}) != 1:
            raise ConfigurationError("composition table rows must have equal length")
        for row in rows:
            for c in row:
                if not math.isfinite(c):
                    raise ConfigurationError(f"composition coefficient {c} is not finite")
                if c < 0:
                    raise ConfigurationError(
                        f"negative composition coefficient {c}: backward parabolic sub-steps are not supported"
                    )

    @property
    def d1(self) -> int:
        return len(self.rows[0])

    def sequence(self) -> List[Tuple[int, float]]:
        """(piece index, coefficient) pairs in application order."""
        order: List[Tuple[int, float]] = []
        for i, row in enumerate(self.rows):
            pieces = range(self.d1)
            if self.alternate and i % 2 == 1:
                pieces = reversed(pieces)
            order.extend((r, row[r]) for r in pieces)
        return order


def strang_table(d1: int) -> CompositionTable:
    """Palindromic half-step table: pieces 1..d1 then d1..1, each with c = 1/2."""
    if d1 < 1:
        raise ConfigurationError(f"d1 must be >= 1, got {d1}")
    return CompositionTable(rows=((0.5,) * d1, (0.5,) * d1), alternate=True)


@dataclass(frozen=True)
class SchemeSpec:
    kind: SchemeKind
    n: int = 1
    table: Optional[CompositionTable] = None
    freeze_point: FreezePoint = field(default_factory=FreezePoint)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigurationError(f"unknown scheme kind '{self.kind}'")
        if self.n < 1:
            raise ConfigurationError(f"step count must be >= 1, got {self.n}")
        if self.kind == "composition" and self.table is None:
            raise ConfigurationError("composition scheme needs a table")

    @property
    def label(self) -> str:
        if self.kind == "td_frozen":
            return f"td_frozen[{self.freeze_point.label}]"
        return self.kind

    def with_n(self, n: int) -> "SchemeSpec":
        return replace(self, n=n)


def _require_constant_coefficients(p: SplitProblem, scheme: str) -> None:
    if p.time_dependent_coefficients:
        raise TimeDependenceError(
            f"{scheme} needs time-independent coefficients; use td_subinterval or td_frozen for {p.name}"
        )


def _sweep(p: SplitProblem, u: GridFunction, t_i: float, sequence: Iterable[Tuple[int, float]], cfg: PropagatorConfig) -> GridFunction:
    clocks = [t_i] * p.d1
    for r, width in sequence:
        if width == 0.0:
            continue
        start = clocks[r]
        clocks[r] = start + width
        u = propagate(p.ops[r], p.free_terms[r], u, start, clocks[r], cfg)
    return u


def lie_step(p: SplitProblem, u: GridFunction, t_i: float, delta: float, cfg: Optional[PropagatorConfig] = None) -> GridFunction:
    """
    One Lie step S^(d1)_delta ... S^(1)_delta.

    Args:
        p: Split problem with time-independent coefficients
        u: State at t_i
        t_i: Step start
        delta: Step width
        cfg: Sub-propagator settings

    Returns:
        The state at t_i + delta
    """
    _require_constant_coefficients(p, "lie")
    return _sweep(p, u, t_i, [(r, delta) for r in range(p.d1)], cfg or PropagatorConfig())


def strang_step(p: SplitProblem, u: GridFunction, t_i: float, delta: float, cfg: Optional[PropagatorConfig] = None) -> GridFunction:
    """Palindromic half-step sweep 1..d1, d1..1."""
    _require_constant_coefficients(p, "strang")
    half = delta / 2.0
    sequence = [(r, half) for r in range(p.d1)] + [(r, half) for r in reversed(range(p.d1))]
    return _sweep(p, u, t_i, sequence, cfg or PropagatorConfig())


def compose_step(
    p: SplitProblem,
    u: GridFunction,
    t_i: float,
    delta: float,
    table: CompositionTable,
    cfg: Optional[PropagatorConfig] = None,
) -> GridFunction:
    """Apply S^(r) with widths c[i][r]*delta in table order."""
    _require_constant_coefficients(p, "composition")
    if table.d1 != p.d1:
        raise ConfigurationError(f"composition table has {table.d1} columns, problem has d1 = {p.d1}")
    return _sweep(p, u, t_i, [(r, c * delta) for r, c in table.sequence()], cfg or PropagatorConfig())


def td_subinterval_step(p: SplitProblem, u: GridFunction, t_i: float, delta: float, cfg: Optional[PropagatorConfig] = None) -> GridFunction:
    """
    Piece r runs with d1*L_r, d1*f_r on [t_i + (r-1)delta/d1, t_i + r*delta/d1].
    """
    cfg = cfg or PropagatorConfig()
    mode = TimeMode.scaled(p.d1)
    sub = delta / p.d1
    for j in range(p.d1):
        u = propagate(p.ops[j], p.free_terms[j], u, t_i + j * sub, t_i + (j + 1) * sub, cfg, mode)
    return u


def td_frozen_step(
    p: SplitProblem,
    u: GridFunction,
    t_i: float,
    delta: float,
    cfg: Optional[PropagatorConfig] = None,
    freeze_point: Optional[FreezePoint] = None,
) -> GridFunction:
    """Each piece over the full width delta with L_r(s_r), f_r(s_r) frozen."""
    cfg = cfg or PropagatorConfig()
    freeze_point = freeze_point or FreezePoint.right_all()
    t_next = t_i + delta
    for r in range(p.d1):
        s = freeze_point.freeze_time(r + 1, t_i, t_next)
        u = propagate(p.ops[r], p.free_terms[r], u, t_i, t_next, cfg, TimeMode.frozen_at(s))
    return u


Step = Callable[[SplitProblem, GridFunction, float, float, PropagatorConfig], GridFunction]


def step_function(spec: SchemeSpec) -> Step:
    """The one-step map selected by spec.kind."""
    if spec.kind == "lie":
        return lie_step
    if spec.kind == "strang":
        return strang_step
    if spec.kind == "composition":
        table = spec.table
        return lambda p, u, t, delta, cfg: compose_step(p, u, t, delta, table, cfg)
    if spec.kind == "td_subinterval":
        return td_subinterval_step
    freeze_point = spec.freeze_point
    return lambda p, u, t, delta, cfg: td_frozen_step(p, u, t, delta, cfg, freeze_point)


def run_scheme(p: SplitProblem, spec: SchemeSpec, grid: Grid, cfg: Optional[PropagatorConfig] = None) -> Trajectory:
    """
    Run a splitting scheme over [0, T] with spec.n steps.

    Args:
        p: Split problem
        spec: Scheme kind and step count
        grid: Spatial grid
        cfg: Sub-propagator settings

    Returns:
        Trajectory with states[0] = sample(u0, 0) and one state per node
    """
    cfg = cfg or PropagatorConfig()
    if spec.kind in ("lie", "strang", "composition"):
        _require_constant_coefficients(p, spec.kind)
    time_grid = TimeGrid(n=spec.n, T=p.horizon_T)
    step = step_function(spec)
    delta = time_grid.step
    u = sample(p.u0, 0.0, grid)
    states = [u]
    for i in range(time_grid.n):
        u = step(p, u, time_grid.node(i), delta, cfg)
        states.append(u)
    logger.debug(f"{spec.label} on {p.name}: n={spec.n} done")
    return Trajectory(time_grid=time_grid, states=tuple(states))
