"""
=============================================================================
CONFIG - experiment file schema (YAML), validated with pydantic
=============================================================================
Sections: problem, scheme, extrapolation, grid, propagator, output.
Unknown keys anywhere are errors. See README.md for the full schema.
"""
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from splitting.errors import ConfigurationError
from splitting.expr import ZERO, parse
from splitting.grid import NormSpec
from splitting.problem import OperatorSpec, SplitProblem, manufacture
from splitting.schemes import CompositionTable, FreezePoint, SchemeSpec, strang_table
from splitting.substep import PropagatorConfig

from .registry import Problem, get_problem
from .settings import get_settings

logger = logging.getLogger(__name__)

_COEFFICIENT_KEY = re.compile(r"^(a2_([1-9])([1-9])|a1_([1-9])|a0|f)$")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemSection(_Section):
    """Either a registered `name` or an inline definition."""

    name: Optional[str] = None
    dim: Optional[int] = Field(default=None, ge=1, le=2)
    horizon: Optional[float] = Field(default=None, gt=0)
    operators: Optional[List[Dict[str, Union[str, float]]]] = None
    u0: Optional[str] = None
    exact: Optional[str] = None
    distribution: Optional[List[float]] = None
    label: Optional[str] = None

    @field_validator("operators")
    @classmethod
    def _known_coefficients(cls, operators):
        if operators is None:
            return operators
        if not operators:
            raise ValueError("at least one operator is required")
        for r, entries in enumerate(operators, start=1):
            for key in entries:
                if not _COEFFICIENT_KEY.match(key):
                    raise ValueError(f"operator {r}: unknown key '{key}' (use a2_ij, a1_i, a0, f)")
        return operators

    @model_validator(mode="after")
    def _registered_or_inline(self):
        inline = [self.dim, self.horizon, self.operators, self.u0, self.exact, self.distribution]
        if self.name is not None:
            if any(v is not None for v in inline):
                raise ValueError("a registered problem takes no inline fields")
            return self
        if self.dim is None or self.horizon is None or self.operators is None:
            raise ValueError("inline problems need dim, horizon and operators")
        if (self.u0 is None) == (self.exact is None):
            raise ValueError("give exactly one of u0 (plain problem) or exact (manufactured)")
        if self.exact is not None and any("f" in entries for entries in self.operators):
            raise ValueError("manufactured problems derive f; remove the f entries")
        if self.exact is None and self.distribution is not None:
            raise ValueError("distribution applies to manufactured problems only")
        return self


class SchemeSection(_Section):
    kind: Literal["lie", "strang", "composition", "td_subinterval", "td_frozen"]
    table: Optional[List[List[float]]] = None
    alternate: bool = False
    palindromic: bool = False
    freeze_point: Literal["right_all", "left_for_first_j"] = "right_all"
    freeze_j: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _table_for_composition(self):
        if self.kind == "composition" and self.table is None and not self.palindromic:
            raise ValueError("composition needs a table (or palindromic: true)")
        if self.kind != "composition" and (self.table is not None or self.palindromic):
            raise ValueError(f"{self.kind} takes no table")
        if self.freeze_point == "right_all" and self.freeze_j:
            raise ValueError("freeze_j applies to left_for_first_j only")
        return self


class ExtrapolationSection(_Section):
    k: int = Field(default=0, ge=0, le=8)
    variant: Literal["general", "strang"] = "general"
    base_n: int = Field(default=16, ge=1)
    levels: int = Field(default=3, ge=2)

    @model_validator(mode="after")
    def _strang_needs_k(self):
        if self.variant == "strang" and self.k < 1:
            raise ValueError("strang weights need k >= 1")
        return self


class GridSection(_Section):
    M: int = 64


class NormEntry(_Section):
    m: int = Field(default=0, ge=0, le=4)
    p: Union[int, float, str] = 2

    @field_validator("p")
    @classmethod
    def _exponent(cls, p):
        if isinstance(p, str):
            if p.strip().lower() not in ("inf", "infinity"):
                raise ValueError(f"norm exponent must be an even integer or 'inf', got '{p}'")
            return math.inf
        if p != math.inf and (p != int(p) or p < 2 or int(p) % 2):
            raise ValueError(f"norm exponent must be an even integer >= 2 or 'inf', got {p}")
        return p

    def to_spec(self) -> NormSpec:
        return NormSpec(sobolev_order=self.m, exponent=self.p)


class OutputSection(_Section):
    path: Optional[Path] = None
    norms: List[NormEntry] = Field(default_factory=lambda: [NormEntry(m=0, p=2), NormEntry(m=0, p="inf")])


class ExperimentConfig(_Section):
    problem: ProblemSection
    scheme: SchemeSection
    extrapolation: ExtrapolationSection = Field(default_factory=ExtrapolationSection)
    grid: GridSection = Field(default_factory=GridSection)
    propagator: PropagatorConfig = Field(default_factory=lambda: PropagatorConfig(substep_tol=get_settings().substep_tol))
    output: OutputSection = Field(default_factory=OutputSection)

    def norms(self) -> List[NormSpec]:
        return [entry.to_spec() for entry in self.output.norms]

    @field_validator("propagator", mode="before")
    @classmethod
    def _default_tolerance(cls, value):
        if isinstance(value, dict) and "substep_tol" not in value:
            return {**value, "substep_tol": get_settings().substep_tol}
        return value

    def scheme_spec(self, d1: int, n: int = 1) -> SchemeSpec:
        section = self.scheme
        table = None
        if section.palindromic:
            table = strang_table(d1)
        elif section.table is not None:
            table = CompositionTable(rows=tuple(map(tuple, section.table)), alternate=section.alternate)
        freeze = FreezePoint(kind=section.freeze_point, j=section.freeze_j)
        return SchemeSpec(kind=section.kind, n=n, table=table, freeze_point=freeze)

    def build_problem(self) -> Problem:
        section = self.problem
        if section.name is not None:
            return get_problem(section.name)
        return _inline_problem(section)

    def with_tolerance(self, substep_tol: float) -> "ExperimentConfig":
        return self.model_copy(update={"propagator": self.propagator.model_copy(update={"substep_tol": substep_tol})})


def _inline_problem(section: ProblemSection) -> Problem:
    dim = section.dim
    ops = []
    free_terms = []
    for entries in section.operators:
        a2 = [["0"] * dim for _ in range(dim)]
        a1 = ["0"] * dim
        a0 = "0"
        given = set()
        for key, value in entries.items():
            match = _COEFFICIENT_KEY.match(key)
            if match.group(2):
                i, j = int(match.group(2)) - 1, int(match.group(3)) - 1
                if i >= dim or j >= dim:
                    raise ConfigurationError(f"{key} is out of range for dim = {dim}")
                a2[i][j] = value
                given.add((i, j))
            elif match.group(4):
                i = int(match.group(4)) - 1
                if i >= dim:
                    raise ConfigurationError(f"{key} is out of range for dim = {dim}")
                a1[i] = value
            elif key == "a0":
                a0 = value
        # a2_ij alone stands for the symmetric pair
        for i, j in list(given):
            if (j, i) not in given:
                a2[j][i] = a2[i][j]
        ops.append(OperatorSpec.build(dim, a2=[[str(c) for c in row] for row in a2], a1=[str(c) for c in a1], a0=str(a0)))
        free_terms.append(parse(str(entries["f"])) if "f" in entries else ZERO)
    name = section.label or "inline"
    if section.exact is not None:
        skeleton = SplitProblem(tuple(ops), tuple(ZERO for _ in ops), ZERO, section.horizon, name)
        return manufacture(section.exact, skeleton, section.distribution)
    return SplitProblem(tuple(ops), tuple(free_terms), parse(section.u0), section.horizon, name)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate an already-loaded mapping."""
    if not isinstance(data, dict):
        raise ConfigurationError("experiment file must contain a mapping of sections")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid experiment configuration:\n{e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment file.

    Args:
        path: YAML file with the six sections

    Returns:
        ExperimentConfig

    Raises:
        ConfigurationError: unreadable file, YAML syntax error or schema violation
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path} is not valid YAML: {e}") from e
    config = parse_config(data)
    logger.info(f"✅ Loaded experiment configuration from {path}")
    return config
