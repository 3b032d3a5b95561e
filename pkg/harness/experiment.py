"""
=============================================================================
EXPERIMENT - references, error measurement, order estimation, orchestration
=============================================================================
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from splitting.errors import ConfigurationError, ExperimentError, GridMismatchError, SplitLabError, ValidationError
from splitting.extrapolate import ExtrapolationWeights, combine, weights
from splitting.grid import Grid, NormSpec, make_grid, norm, sample
from splitting.problem import ManufacturedProblem, SplitProblem, check_ellipticity
from splitting.schemes import SchemeSpec, run_scheme
from splitting.substep import PropagatorConfig, unsplit_reference
from splitting.trajectory import TimeGrid, Trajectory

from .config import ExperimentConfig
from .registry import Problem
from .report import ConvergenceReport, ConvergenceRow, write_csv
from .settings import get_settings

logger = logging.getLogger(__name__)

FLOOR_FACTOR = 50.0
PREASYMPTOTIC_DEVIATION = 0.5
SUBSTEP_BUDGET = 10**5
REFERENCE_TOL = 1e-12
AUDIT_THRESHOLD = 0.05


# =============================================================================
# Reference solutions and errors
# =============================================================================

def reference(p: Problem, grid: Grid, time_grid: TimeGrid, cfg: Optional[PropagatorConfig] = None) -> Trajectory:
    """
    Reference trajectory on time_grid.

    Manufactured problems sample the exact solution; others are solved
    unsplit at tolerance min(cfg.substep_tol, 1e-12).
    """
    if isinstance(p, ManufacturedProblem):
        states = tuple(sample(p.exact, time_grid.node(i), grid) for i in range(time_grid.n + 1))
        return Trajectory(time_grid=time_grid, states=states)
    cfg = cfg or PropagatorConfig()
    tol = min(cfg.substep_tol, REFERENCE_TOL)
    return unsplit_reference(p, grid, time_grid, cfg.model_copy(update={"substep_tol": tol}))


def restrict(traj: Trajectory, n: int) -> Trajectory:
    """Sub-sample a trajectory on T_{2^j n} to the nodes of T_n."""
    if n < 1 or traj.n % n:
        raise GridMismatchError(f"cannot restrict n={traj.n} to n={n}")
    ratio = traj.n // n
    if ratio & (ratio - 1):
        raise GridMismatchError(f"refinement ratio {ratio} is not a power of two")
    if ratio == 1:
        return traj
    return Trajectory(time_grid=TimeGrid(n=n, T=traj.time_grid.T), states=traj.states[::ratio])


def measure_error(traj: Trajectory, ref: Trajectory, s: NormSpec) -> float:
    """max over the nodes of T_n of ||traj(t_i) - ref(t_i)||_s."""
    if traj.time_grid != ref.time_grid:
        raise GridMismatchError(f"time grids differ: n={traj.n} vs n={ref.n}")
    return max(norm(a - b, s) for a, b in zip(traj.states, ref.states))


# =============================================================================
# Order estimation
# =============================================================================

@dataclass(frozen=True)
class OrderEstimate:
    """Pairwise orders are aligned with the input rows; the coarsest has none."""

    pairwise: Tuple[Optional[float], ...]
    fitted: Optional[float]
    floored: Tuple[bool, ...]
    used: Tuple[int, ...]
    dropped_preasymptotic: bool = False

    @property
    def floor_reached(self) -> bool:
        return any(self.floored)


def estimate_order(errors: Sequence[Tuple[float, float]], floor: float = 0.0) -> OrderEstimate:
    """
    Empirical convergence orders from (delta, error) pairs.

    Args:
        errors: One (delta, error) per level, any order; sorted coarse to fine
        floor: Errors at or below this value are flagged and excluded

    Returns:
        OrderEstimate with pairwise log-ratios and the least-squares slope
    """
    if len(errors) < 2:
        raise ConfigurationError("order estimation needs at least two levels")
    series = sorted(((float(d), float(e)) for d, e in errors), key=lambda pair: -pair[0])
    deltas = np.array([d for d, _ in series])
    values = np.array([e for _, e in series])
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ConfigurationError("errors must be finite and non-negative")
    floored = tuple(bool(e <= floor) for e in values)
    pairwise: List[Optional[float]] = [None]
    for i in range(1, len(series)):
        if floored[i] or floored[i - 1]:
            pairwise.append(None)
        else:
            pairwise.append(float(np.log2(values[i - 1] / values[i]) / np.log2(deltas[i - 1] / deltas[i])))
    used = [i for i in range(len(series)) if not floored[i]]
    dropped = False
    if len(used) > 2:
        orders = [float(np.log2(values[a] / values[b]) / np.log2(deltas[a] / deltas[b])) for a, b in zip(used, used[1:])]
        if abs(orders[0] - float(np.median(orders))) > PREASYMPTOTIC_DEVIATION:
            logger.warning(f"Dropping preasymptotic point delta={deltas[used[0]]:.4e} (pairwise order {orders[0]:.3f})")
            used = used[1:]
            dropped = True
    fitted = None
    if len(used) >= 2:
        slope, _ = np.polyfit(np.log(deltas[used]), np.log(values[used]), 1)
        fitted = float(slope)
    if any(floored):
        logger.warning(f"Error floor {floor:.1e} reached at {sum(floored)} level(s); those levels are excluded")
    return OrderEstimate(pairwise=tuple(pairwise), fitted=fitted, floored=floored, used=tuple(used), dropped_preasymptotic=dropped)


# =============================================================================
# Orchestration
# =============================================================================

def _substeps_per_step(spec: SchemeSpec, d1: int) -> int:
    if spec.kind == "strang":
        return 2 * d1
    if spec.kind == "composition":
        return len(spec.table.sequence())
    return d1


def _run_one(p: SplitProblem, spec: SchemeSpec, grid: Grid, cfg: PropagatorConfig) -> Trajectory:
    started = time.perf_counter()
    try:
        traj = run_scheme(p, spec, grid, cfg)
    except SplitLabError as e:
        raise ExperimentError(str(e), spec.label, spec.n) from e
    logger.info(f"✅ {spec.label} n={spec.n} finished in {time.perf_counter() - started:.2f}s")
    return traj


def _constituents(
    p: SplitProblem,
    scheme: SchemeSpec,
    grid: Grid,
    cfg: PropagatorConfig,
    counts: Sequence[int],
    workers: int,
) -> Dict[int, Trajectory]:
    specs = [scheme.with_n(n) for n in counts]
    if workers <= 1:
        return {spec.n: _run_one(p, spec, grid, cfg) for spec in specs}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(lambda spec: _run_one(p, spec, grid, cfg), specs))
    return {spec.n: run for spec, run in zip(specs, runs)}


def run_experiment(
    cfg: ExperimentConfig,
    *,
    write: bool = True,
    reuse: bool = True,
    workers: Optional[int] = None,
) -> ConvergenceReport:
    """
    Dyadic refinement study of one scheme with Richardson-type acceleration.

    For each level L the scheme runs at n = base_n*2^L, ..., 2^k n steps;
    the runs are combined with the configured weights and compared against
    the reference in every configured norm.

    Args:
        cfg: Validated experiment configuration
        write: Write the CSV when cfg.output.path is set
        reuse: Compute each step count once and share it across levels
        workers: Thread pool size for constituent runs (default from settings)

    Returns:
        ConvergenceReport
    """
    started = time.perf_counter()
    problem = cfg.build_problem()
    base = problem.base if isinstance(problem, ManufacturedProblem) else problem
    grid = make_grid(base.dim, cfg.grid.M)
    T = base.horizon_T
    base.validate(grid, times=(0.0, T / 2.0, T))
    for r, op in enumerate(base.ops, start=1):
        report = check_ellipticity(op, grid, times=(0.0, T / 2.0, T))
        if not report.passed:
            raise ValidationError(f"operator {r} of {base.name} is not elliptic (min eigenvalue {report.min_eigenvalue:.3e})")

    extrapolation = cfg.extrapolation
    w: ExtrapolationWeights = weights(extrapolation.k, extrapolation.variant)
    scheme = cfg.scheme_spec(base.d1)
    propagator = cfg.propagator
    workers = workers or get_settings().workers
    levels = [extrapolation.base_n * 2 ** level for level in range(extrapolation.levels)]
    counts = sorted({n * 2 ** j for n in levels for j in range(w.runs)})

    substeps = sum(counts) * _substeps_per_step(scheme, base.d1)
    if substeps > SUBSTEP_BUDGET:
        logger.warning(f"Experiment needs {substeps} sub-steps (budget {SUBSTEP_BUDGET}); expect a long run")
    logger.info(f"Starting {scheme.label} on {base.name}: k={w.k} ({w.variant}), n in {levels}, M={grid.points_per_axis}")

    if reuse:
        runs = _constituents(base, scheme, grid, propagator, counts, workers)
        per_level = {n: [runs[n * 2 ** j] for j in range(w.runs)] for n in levels}
    else:
        per_level = {}
        for n in levels:
            fresh = _constituents(base, scheme, grid, propagator, [n * 2 ** j for j in range(w.runs)], workers)
            per_level[n] = [fresh[n * 2 ** j] for j in range(w.runs)]

    if isinstance(problem, ManufacturedProblem):
        references = {n: reference(problem, grid, TimeGrid(n=n, T=T)) for n in levels}
    else:
        finest = reference(problem, grid, TimeGrid(n=levels[-1], T=T), propagator)
        references = {n: restrict(finest, n) for n in levels}

    norms = cfg.norms()
    floor = FLOOR_FACTOR * propagator.substep_tol
    rows: List[ConvergenceRow] = []
    notes: List[str] = []
    for s in norms:
        measured = []
        for n in levels:
            constituents = per_level[n]
            accelerated = combine(constituents, w)
            error = measure_error(accelerated, references[n], s)
            finest_error = measure_error(restrict(constituents[-1], n), references[n], s)
            measured.append((n, error, finest_error))
        estimate = estimate_order([(T / n, e) for n, e, _ in measured], floor=floor)
        if estimate.dropped_preasymptotic:
            notes.append(f"{s.label}: coarsest level dropped from the fit (preasymptotic)")
        if estimate.floor_reached:
            notes.append(f"{s.label}: error floor {floor:.1e} reached")
        for position, (n, error, finest_error) in enumerate(measured):
            rows.append(
                ConvergenceRow(
                    scheme=scheme.label,
                    k=w.k,
                    n=n,
                    delta=T / n,
                    norm=s,
                    error=error,
                    pairwise_order=estimate.pairwise[position],
                    fitted_order=estimate.fitted,
                    floored=estimate.floored[position],
                    finest_constituent_error=finest_error,
                )
            )

    result = ConvergenceReport(
        rows=rows,
        metadata={
            "problem": base.name,
            "scheme": scheme.label,
            "k": w.k,
            "variant": w.variant,
            "weights": w.b,
            "cond": w.cond,
            "M": grid.points_per_axis,
            "substep_tol": propagator.substep_tol,
            "wall_time": time.perf_counter() - started,
            "notes": notes,
        },
    )
    if write and cfg.output.path is not None:
        write_csv(result, cfg.output.path)
    logger.info(f"✅ Experiment {base.name}/{scheme.label} done in {result.metadata['wall_time']:.2f}s")
    return result


@dataclass(frozen=True)
class AuditResult:
    changes: Dict[str, Optional[float]]
    threshold: float = AUDIT_THRESHOLD

    @property
    def max_change(self) -> Optional[float]:
        known = [c for c in self.changes.values() if c is not None]
        return max(known) if known else None

    @property
    def passed(self) -> bool:
        return self.max_change is not None and self.max_change < self.threshold


def audit_tolerance_separation(cfg: ExperimentConfig, factor: float = 10.0) -> AuditResult:
    """
    Rerun an experiment at substep_tol/factor and compare fitted orders.

    A change below 0.05 in every norm shows that sub-solver error does not
    drive the measured orders.
    """
    baseline = run_experiment(cfg, write=False)
    tightened = run_experiment(cfg.with_tolerance(cfg.propagator.substep_tol / factor), write=False)
    changes: Dict[str, Optional[float]] = {}
    for s in baseline.norms():
        before, after = baseline.fitted_order(s), tightened.fitted_order(s)
        changes[s.label] = None if before is None or after is None else abs(after - before)
    result = AuditResult(changes=changes)
    if result.passed:
        logger.info(f"✅ Tolerance separation holds: max order change {result.max_change:.2e}")
    else:
        logger.warning(f"Tolerance separation failed or undetermined: {changes}")
    return result
