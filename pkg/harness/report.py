"""
=============================================================================
REPORT - convergence tables, CSV output and console rendering
=============================================================================
CSV columns: scheme,k,n,delta,norm_m,norm_p,error,pairwise_order,fitted_order
"""
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from splitting.grid import NormSpec

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["scheme", "k", "n", "delta", "norm_m", "norm_p", "error", "pairwise_order", "fitted_order"]
FLOOR = "floor"


@dataclass(frozen=True)
class ConvergenceRow:
    scheme: str
    k: int
    n: int
    delta: float
    norm: NormSpec
    error: float
    pairwise_order: Optional[float] = None
    fitted_order: Optional[float] = None
    floored: bool = False
    # error of the finest constituent u_{2^k n} at the same level
    finest_constituent_error: Optional[float] = None


@dataclass
class ConvergenceReport:
    rows: List[ConvergenceRow]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(
            self.rows,
            key=lambda row: (row.scheme, row.norm.sobolev_order, row.norm.exponent, row.n),
        )

    def norms(self) -> List[NormSpec]:
        seen: List[NormSpec] = []
        for row in self.rows:
            if row.norm not in seen:
                seen.append(row.norm)
        return seen

    def series(self, norm: NormSpec) -> List[ConvergenceRow]:
        return [row for row in self.rows if row.norm == norm]

    def fitted_order(self, norm: NormSpec) -> Optional[float]:
        rows = self.series(norm)
        return rows[0].fitted_order if rows else None


def _p_label(exponent: float) -> Union[int, str]:
    return "inf" if exponent == math.inf else int(exponent)


def _order_cell(value: Optional[float], floored: bool) -> Union[float, str]:
    if value is not None:
        return value
    return FLOOR if floored else ""


def to_frame(report: ConvergenceReport) -> pd.DataFrame:
    """One DataFrame row per report row, with the CSV columns."""
    records = []
    for norm in report.norms():
        series = report.series(norm)
        any_floor = any(row.floored for row in series)
        for position, row in enumerate(series):
            pair_floored = row.floored or (position > 0 and series[position - 1].floored)
            records.append(
                {
                    "scheme": row.scheme,
                    "k": row.k,
                    "n": row.n,
                    "delta": row.delta,
                    "norm_m": row.norm.sobolev_order,
                    "norm_p": _p_label(row.norm.exponent),
                    "error": row.error,
                    "pairwise_order": _order_cell(row.pairwise_order, pair_floored),
                    "fitted_order": _order_cell(row.fitted_order, any_floor),
                }
            )
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


def write_csv(report: ConvergenceReport, path: Union[str, Path]) -> Path:
    """
    Write the report atomically (temporary file in the target directory, then rename).

    Args:
        report: Convergence report
        path: Destination file; parent directories are created

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = to_frame(report)
    descriptor, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(descriptor, "w", encoding="utf-8", newline="") as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    logger.info(f"✅ Report written to {path}")
    return path


def _fmt(value: Optional[float], spec: str = ".3f") -> str:
    return "-" if value is None else format(value, spec)


def render(report: ConvergenceReport) -> str:
    """Markdown-style text table for the console."""
    meta = report.metadata
    lines = [
        f"📊 **Convergence report: {meta.get('problem', '?')}**",
        "",
        f"scheme: {meta.get('scheme', '?')} | k: {meta.get('k', '?')} ({meta.get('variant', 'general')}) | "
        f"M: {meta.get('M', '?')} | substep_tol: {meta.get('substep_tol', '?')} | wall time: {meta.get('wall_time', 0.0):.2f}s",
        "",
    ]
    for norm in report.norms():
        series = report.series(norm)
        fitted = report.fitted_order(norm)
        lines.append(f"**{norm.label}**  fitted order: {_fmt(fitted)}")
        lines.append("| n | delta | error | finest constituent | pairwise |")
        lines.append("|---|---|---|---|---|")
        for row in series:
            pairwise = FLOOR if row.floored else _fmt(row.pairwise_order)
            lines.append(
                f"| {row.n} | {row.delta:.4e} | {row.error:.4e} | {_fmt(row.finest_constituent_error, '.4e')} | {pairwise} |"
            )
        if any(row.floored for row in series):
            lines.append("⚠️ error floor reached: floored levels excluded from the fit")
        lines.append("")
    for note in meta.get("notes", []):
        lines.append(f"- {note}")
    return "\n".join(lines).rstrip() + "\n"
