"""
=============================================================================
GRID - periodic uniform mesh, grid functions, spectral derivatives, norms
=============================================================================
The spatial domain is the torus [0, 2*pi)^dim with M nodes per axis at
coordinates j*h, h = 2*pi/M. Derivatives are computed in Fourier space, which
is exact for trigonometric polynomials resolved by the mesh.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, GridMismatchError, NonFiniteError, ValidationError
from .expr import Expr, evaluate

logger = logging.getLogger(__name__)

AXIS_LENGTH = 2.0 * math.pi
MAX_DERIVATIVE_ORDER = 4


@dataclass(frozen=True)
class Grid:
    """Periodic uniform mesh with M = points_per_axis nodes on each of dim axes."""

    dim: int
    points_per_axis: int
    axis_length: float = AXIS_LENGTH

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"grid dimension must be 1 or 2, got {self.dim}")
        m = self.points_per_axis
        if not isinstance(m, (int, np.integer)) or m < 8 or m & (m - 1):
            raise ConfigurationError(f"points per axis must be a power of two >= 8, got {m}")
        if self.axis_length != AXIS_LENGTH:
            raise ConfigurationError("axis length is fixed to 2*pi")

    @property
    def spacing(self) -> float:
        return self.axis_length / self.points_per_axis

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Node coordinates per axis, each broadcast to the full grid shape."""
        axis = np.arange(self.points_per_axis) * self.spacing
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        for component in mesh:
            component.setflags(write=False)
        return tuple(mesh)

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis in FFT ordering, broadcast to the grid shape."""
        k = np.fft.fftfreq(self.points_per_axis, d=1.0 / self.points_per_axis)
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        for component in mesh:
            component.setflags(write=False)
        return tuple(mesh)


def make_grid(dim: int, points_per_axis: int) -> Grid:
    """
    Build a validated periodic grid.

    Args:
        dim: Spatial dimension (1 or 2)
        points_per_axis: Nodes per axis, a power of two >= 8

    Returns:
        Grid with spacing 2*pi/points_per_axis
    """
    return Grid(dim=dim, points_per_axis=points_per_axis)


class GridFunction:
    """Immutable real field on a grid; values have shape grid.shape."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: Union[np.ndarray, Sequence[float]]):
        array = np.array(values, dtype=float)
        if array.size != grid.size:
            raise GridMismatchError(f"expected {grid.size} values, got {array.size}")
        array = array.reshape(grid.shape)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError("grid function contains NaN or Inf")
        array.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", array)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def flat(self) -> np.ndarray:
        """Row-major view of the values, length M**dim."""
        return self.values.ravel()

    def _other_values(self, other: "GridFunction") -> np.ndarray:
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatchError("grid functions live on different grids")
        return other.values

    def __add__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return GridFunction(self.grid, self.values + values)

    def __sub__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return GridFunction(self.grid, self.values - values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return GridFunction(self.grid, self.values / float(scalar))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(dim={self.grid.dim}, M={self.grid.points_per_axis}, max={np.max(np.abs(self.values)):.3e})"


def sample_values(expr: Expr, t: float, grid: Grid) -> np.ndarray:
    """Evaluate an expression at every node; returns a fresh array of grid.shape."""
    for name in expr.variables:
        if name != "t" and int(name[1:]) > grid.dim:
            raise ValidationError(f"expression references {name} on a {grid.dim}-d grid")
    values = evaluate(expr, t, grid.coordinates)
    return np.array(np.broadcast_to(values, grid.shape), dtype=float)


def sample(expr: Expr, t: float, grid: Grid) -> GridFunction:
    """
    Sample an expression on the grid nodes at time t.

    Args:
        expr: Expression in t and x1..x_dim
        t: Time
        grid: Target grid

    Returns:
        GridFunction with values[i] = expr(t, node_i)
    """
    return GridFunction(grid, sample_values(expr, t, grid))


# =============================================================================
# Spectral differentiation
# =============================================================================

@lru_cache(maxsize=128)
def fourier_multiplier(grid: Grid, orders: Tuple[int, ...]) -> np.ndarray:
    """Symbol of D^orders on the grid; odd orders drop the Nyquist mode."""
    multiplier = np.ones(grid.shape, dtype=complex)
    nyquist = grid.points_per_axis // 2
    for axis, order in enumerate(orders):
        if order == 0:
            continue
        k = grid.wavenumbers[axis]
        factor = (1j * k) ** order
        if order % 2:
            factor = np.where(np.abs(k) == nyquist, 0.0, factor)
        multiplier = multiplier * factor
    multiplier.setflags(write=False)
    return multiplier


def _check_orders(grid: Grid, orders: Sequence[int]) -> Tuple[int, ...]:
    orders = tuple(int(o) for o in orders)
    if len(orders) != grid.dim or any(o < 0 for o in orders):
        raise ValidationError(f"multi-index {orders} does not match a {grid.dim}-d grid")
    if sum(orders) > MAX_DERIVATIVE_ORDER:
        raise ValidationError(f"derivative order {sum(orders)} exceeds {MAX_DERIVATIVE_ORDER}")
    return orders


def derivative_values(values: np.ndarray, grid: Grid, orders_list: Iterable[Sequence[int]]) -> List[np.ndarray]:
    """Several spectral derivatives of raw node values sharing one forward FFT."""
    orders_list = [_check_orders(grid, orders) for orders in orders_list]
    if all(sum(orders) == 0 for orders in orders_list):
        return [np.array(values, dtype=float) for _ in orders_list]
    spectrum = np.fft.fftn(values)
    result = []
    for orders in orders_list:
        if sum(orders) == 0:
            result.append(np.array(values, dtype=float))
        else:
            result.append(np.fft.ifftn(spectrum * fourier_multiplier(grid, orders)).real)
    return result


def derivative(u: GridFunction, multi_index: Sequence[int]) -> GridFunction:
    """
    Spectral derivative D^gamma u.

    Args:
        u: Grid function
        multi_index: Per-axis derivative orders, e.g. (1,) for D_1, (2,) for D_11,
            (1, 1) for D_12; total order at most 4

    Returns:
        The derivative as a new GridFunction
    """
    (values,) = derivative_values(u.values, u.grid, [multi_index])
    return GridFunction(u.grid, values)


# =============================================================================
# Norms
# =============================================================================

@dataclass(frozen=True)
class NormSpec:
    """Discrete W^m_p norm: sobolev_order m in [0, 4], exponent p even >= 2 or inf."""

    sobolev_order: int = 0
    exponent: float = 2

    def __post_init__(self):
        if not 0 <= self.sobolev_order <= MAX_DERIVATIVE_ORDER:
            raise ConfigurationError(f"Sobolev order must lie in [0, {MAX_DERIVATIVE_ORDER}]")
        p = self.exponent
        if p != math.inf and (p < 2 or p != int(p) or int(p) % 2):
            raise ConfigurationError(f"norm exponent must be an even integer >= 2 or inf, got {p}")

    @property
    def label(self) -> str:
        p = "inf" if self.exponent == math.inf else str(int(self.exponent))
        return f"m={self.sobolev_order},p={p}"


def multi_indices(dim: int, max_order: int) -> List[Tuple[int, ...]]:
    """All per-axis order tuples with total order <= max_order, lowest order first."""
    indices = [gamma for gamma in itertools.product(range(max_order + 1), repeat=dim) if sum(gamma) <= max_order]
    return sorted(indices, key=lambda gamma: (sum(gamma), gamma))


def norm(u: GridFunction, spec: NormSpec) -> float:
    """
    Discrete Sobolev-type norm.

    For p < inf: (sum over |gamma| <= m of h^dim * sum_nodes |D^gamma u|^p)^(1/p).
    For p = inf: max over nodes and |gamma| <= m of |D^gamma u|.
    """
    grid = u.grid
    derivatives = derivative_values(u.values, grid, multi_indices(grid.dim, spec.sobolev_order))
    if spec.exponent == math.inf:
        return float(max(np.max(np.abs(d)) for d in derivatives))
    p = int(spec.exponent)
    cell = grid.spacing ** grid.dim
    total = sum(cell * np.sum(np.abs(d) ** p) for d in derivatives)
    return float(total ** (1.0 / p))
