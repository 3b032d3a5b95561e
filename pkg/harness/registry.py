"""
=============================================================================
REGISTRY - built-in problems, selectable by name from the CLI and configs
=============================================================================
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Union

from splitting.errors import ConfigurationError
from splitting.problem import ManufacturedProblem, OperatorSpec, SplitProblem, manufacture, unforced

logger = logging.getLogger(__name__)

Problem = Union[SplitProblem, ManufacturedProblem]


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    description: str
    factory: Callable[[], Problem]

    def build(self) -> Problem:
        return self.factory()


def _heat(dim: int = 1, axis: int = 0, scale: str = "1") -> OperatorSpec:
    a2 = [["0"] * dim for _ in range(dim)]
    a2[axis][axis] = scale
    return OperatorSpec.build(dim, a2=a2)


def _potential(dim: int, a0: str) -> OperatorSpec:
    return OperatorSpec.build(dim, a0=a0)


def p1_heat_potential() -> ManufacturedProblem:
    skeleton = unforced([_heat(), _potential(1, "cos(x1)")], "0", 0.5, name="p1_heat_potential")
    return manufacture("exp(-t)*sin(x1)", skeleton)


def p2_time_dependent() -> ManufacturedProblem:
    skeleton = unforced([_heat(), _potential(1, "cos(x1)*(1+0.5*sin(t))")], "0", 0.5, name="p2_time_dependent")
    return manufacture("exp(-t)*sin(x1)", skeleton)


def p1_unforced() -> SplitProblem:
    return unforced([_heat(), _potential(1, "cos(x1)")], "sin(x1)", 0.5, name="p1_unforced")


def commuting_heat() -> SplitProblem:
    return unforced([_heat(scale="0.5"), _heat(scale="0.5")], "sin(x1)+0.5*cos(2*x1)", 0.5, name="commuting_heat")


def degenerate_diffusion() -> ManufacturedProblem:
    skeleton = unforced(
        [OperatorSpec.build(1, a2=[["sin(x1)^2"]]), _potential(1, "cos(x1)")],
        "0",
        0.25,
        name="degenerate_diffusion",
    )
    return manufacture("exp(-t)*sin(x1)", skeleton)


def heat_mode() -> ManufacturedProblem:
    skeleton = unforced([_heat()], "0", 0.5, name="heat_mode")
    return manufacture("exp(-4*t)*sin(2*x1)", skeleton)


def adi_heat_2d() -> ManufacturedProblem:
    x_direction = _heat(dim=2, axis=0)
    y_direction = OperatorSpec.build(2, a2=[["0", "0"], ["0", "1"]], a0="0.5*cos(x1)*cos(x2)")
    skeleton = unforced([x_direction, y_direction], "0", 0.5, name="adi_heat_2d")
    return manufacture("exp(-t)*sin(x1)*cos(x2)", skeleton)


PROBLEMS: Dict[str, RegistryEntry] = {
    entry.name: entry
    for entry in (
        RegistryEntry("p1_heat_potential", "1-D, L1 = D11, L2 = cos(x1); exact exp(-t)*sin(x1)", p1_heat_potential),
        RegistryEntry("p2_time_dependent", "p1 with L2 = cos(x1)*(1+0.5*sin(t)); time-dependent coefficients", p2_time_dependent),
        RegistryEntry("p1_unforced", "p1 operators with f = 0 and u0 = sin(x1); no closed form", p1_unforced),
        RegistryEntry("commuting_heat", "L1 = L2 = D11/2, f = 0; every scheme is exact", commuting_heat),
        RegistryEntry("degenerate_diffusion", "L1 = sin(x1)^2 D11 (degenerate), L2 = cos(x1)", degenerate_diffusion),
        RegistryEntry("heat_mode", "single piece D11, exact exp(-4t)*sin(2*x1)", heat_mode),
        RegistryEntry("adi_heat_2d", "2-D directional split L1 = D11, L2 = D22 + cos(x1)cos(x2)/2", adi_heat_2d),
    )
}


def get_problem(name: str) -> Problem:
    """Build a registered problem by name."""
    if name not in PROBLEMS:
        raise ConfigurationError(f"unknown problem '{name}'; available: {', '.join(sorted(PROBLEMS))}")
    logger.debug(f"Building registered problem {name}")
    return PROBLEMS[name].build()


def list_problems() -> List[RegistryEntry]:
    return [PROBLEMS[name] for name in sorted(PROBLEMS)]
