"""
=============================================================================
EXTRAPOLATE - acceleration weights and the combination v_n = sum b_j u_{2^j n}
=============================================================================
General weights solve V^T b^T = e_1 with V[i][j] = 2^{-ij} (i, j = 0..k), so
that sum b_j = 1 and sum_j b_j 2^{-ij} = 0 for i = 1..k. The Strang variant
uses V[i][0] = 1, V[i][j] = 2^{-i(j+1)} for j >= 1 (size k).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence, Tuple

import numpy as np
import sympy

from .errors import ConfigurationError, GridMismatchError
from .grid import GridFunction
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

MAX_K = 8
COND_WARNING = 1e8

Variant = Literal["general", "strang"]


@dataclass(frozen=True)
class ExtrapolationWeights:
    """Weights b_0..b_{size-1} applied to runs at n, 2n, 4n, ..."""

    k: int
    b: Tuple[float, ...]
    variant: str
    cond: float

    @property
    def runs(self) -> int:
        return len(self.b)


def _check_k(k: int, variant: str) -> None:
    if variant not in ("general", "strang"):
        raise ConfigurationError(f"unknown weight variant '{variant}'")
    low = 0 if variant == "general" else 1
    if not isinstance(k, (int, np.integer)) or not low <= k <= MAX_K:
        raise ConfigurationError(f"{variant} weights need {low} <= k <= {MAX_K}, got {k}")


def _exponent(i: int, j: int, variant: str) -> int:
    if variant == "general":
        return i * j
    return 0 if j == 0 else i * (j + 1)


def vandermonde(k: int, variant: Variant = "general") -> np.ndarray:
    """The defining matrix: size k+1 for general, k for strang."""
    _check_k(k, variant)
    size = k + 1 if variant == "general" else k
    return np.array([[2.0 ** -_exponent(i, j, variant) for j in range(size)] for i in range(size)])


def _solve(k: int, variant: Variant) -> ExtrapolationWeights:
    matrix = vandermonde(k, variant)
    rhs = np.zeros(matrix.shape[0])
    rhs[0] = 1.0
    b = np.linalg.solve(matrix.T, rhs)
    # one refinement step
    b = b + np.linalg.solve(matrix.T, rhs - matrix.T @ b)
    cond = float(np.linalg.cond(matrix))
    if cond > COND_WARNING:
        logger.warning(f"Vandermonde matrix for k={k} ({variant}) is ill-conditioned: cond={cond:.3e}")
    return ExtrapolationWeights(k=k, b=tuple(float(x) for x in b), variant=variant, cond=cond)


def richardson_weights(k: int) -> ExtrapolationWeights:
    """
    Weights b = e_1 V^{-1} giving an order k+1 combination of a first-order scheme.

    Args:
        k: Number of cancelled error terms, 0 <= k <= 8

    Returns:
        ExtrapolationWeights with k+1 entries
    """
    _check_k(k, "general")
    return _solve(k, "general")


def strang_weights(k: int) -> ExtrapolationWeights:
    """Weights for the Strang variant, k entries, 1 <= k <= 8; k = 2 gives (-1/3, 4/3)."""
    _check_k(k, "strang")
    return _solve(k, "strang")


def weights(k: int, variant: Variant = "general") -> ExtrapolationWeights:
    _check_k(k, variant)
    return richardson_weights(k) if variant == "general" else strang_weights(k)


def exact_weights(k: int, variant: Variant = "general") -> Tuple[sympy.Rational, ...]:
    """The same weights as exact rationals, from a sympy solve."""
    _check_k(k, variant)
    size = k + 1 if variant == "general" else k
    matrix = sympy.Matrix(size, size, lambda i, j: sympy.Rational(1, 2 ** _exponent(i, j, variant)))
    rhs = sympy.Matrix([1] + [0] * (size - 1))
    return tuple(matrix.T.LUsolve(rhs))


def combine(runs: Sequence[Trajectory], w: ExtrapolationWeights) -> Trajectory:
    """
    Pointwise combination at the shared nodes of T_n.

    Args:
        runs: Trajectories with n, 2n, ..., 2^(size-1) n steps on the same
            horizon and spatial grid
        w: Weights, one per run

    Returns:
        Trajectory on T_n whose node i holds sum_j b_j * runs[j][i * 2^j]
    """
    if len(runs) != w.runs:
        raise ConfigurationError(f"{w.runs} weights need {w.runs} runs, got {len(runs)}")
    base = runs[0]
    for j, run in enumerate(runs):
        if run.n != base.n * 2 ** j:
            raise GridMismatchError(f"run {j} has {run.n} steps, expected {base.n * 2 ** j}")
        if run.time_grid.T != base.time_grid.T:
            raise GridMismatchError(f"run {j} has horizon {run.time_grid.T}, expected {base.time_grid.T}")
        if run.grid != base.grid:
            raise GridMismatchError(f"run {j} lives on a different spatial grid")
    if w.runs == 1 and w.b[0] == 1.0:
        return base
    states = []
    for i in range(base.n + 1):
        values = w.b[0] * base[i].values
        for j in range(1, w.runs):
            values = values + w.b[j] * runs[j][i * 2 ** j].values
        states.append(GridFunction(base.grid, values))
    return Trajectory(time_grid=base.time_grid, states=tuple(states))
