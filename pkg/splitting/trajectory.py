"""
Time grids T_n and the trajectories u_n(t_i) recorded on them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grid import Grid, GridFunction


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_i = i*T/n, i = 0..n."""

    n: int
    T: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigurationError(f"step count must be a positive integer, got {self.n}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.T}")

    @property
    def step(self) -> float:
        return self.T / self.n

    def node(self, i: int) -> float:
        # (i*T)/n keeps t_{2i} on T_{2n} bit-equal to t_i on T_n
        return (i * self.T) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.array([self.node(i) for i in range(self.n + 1)])

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(n=self.n * factor, T=self.T)


@dataclass(frozen=True)
class Trajectory:
    """States u_n(t_0), ..., u_n(t_n) of one run; states[0] is the sampled u0."""

    time_grid: TimeGrid
    states: Tuple[GridFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != self.time_grid.n + 1:
            raise GridMismatchError(f"expected {self.time_grid.n + 1} states, got {len(self.states)}")
        grid = self.states[0].grid
        if any(state.grid != grid for state in self.states):
            raise GridMismatchError("trajectory states live on different grids")

    @classmethod
    def from_states(cls, time_grid: TimeGrid, states: Sequence[GridFunction]) -> "Trajectory":
        return cls(time_grid=time_grid, states=tuple(states))

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    @property
    def n(self) -> int:
        return self.time_grid.n

    @property
    def final(self) -> GridFunction:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> GridFunction:
        return self.states[i]

    def __iter__(self) -> Iterator[GridFunction]:
        return iter(self.states)
