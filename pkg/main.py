import argparse
import logging
import sys
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

from harness.settings import get_settings

logging.basicConfig(level=get_settings().log_level.upper(), format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

from harness import audit_tolerance_separation, list_problems, load_config, render, run_experiment
from splitting import exact_weights, richardson_weights, strang_weights
from splitting.errors import SplitLabError
from splitting.problem import ManufacturedProblem

EXACT_DISPLAY_MAX_K = 4


def cmd_weights(args) -> int:
    """Print b as decimals and, for small k, as exact rationals"""
    w = richardson_weights(args.k) if args.variant == "general" else strang_weights(args.k)
    print(f"🔢 {args.variant} weights, k={w.k} (cond(V) = {w.cond:.3e})")
    exact = exact_weights(args.k, args.variant) if args.k <= EXACT_DISPLAY_MAX_K else None
    for j, b in enumerate(w.b):
        line = f"  b_{j} = {b:+.17g}"
        if exact is not None:
            line += f"   ({exact[j]})"
        print(line)
    return 0


def cmd_run(args) -> int:
    """Run one experiment file, write its CSV and print the order table"""
    cfg = load_config(args.config)
    if args.output:
        cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"path": args.output})})
    elif cfg.output.path is None:
        path = get_settings().results_dir / f"{Path(args.config).stem}.csv"
        cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"path": path})})
    report = run_experiment(cfg)
    print(render(report))
    if args.audit:
        audit = audit_tolerance_separation(cfg)
        for label, change in audit.changes.items():
            shown = "undetermined" if change is None else f"{change:.3e}"
            print(f"  {label}: fitted order change at substep_tol/10 = {shown}")
        print("✅ Tolerance separation holds" if audit.passed else "❌ Tolerance separation not demonstrated")
        return 0 if audit.passed else 2
    return 0


def cmd_list_problems(args) -> int:
    """Print the built-in registry"""
    print("📚 Built-in problems")
    for entry in list_problems():
        problem = entry.build()
        base = problem.base if isinstance(problem, ManufacturedProblem) else problem
        kind = "manufactured" if isinstance(problem, ManufacturedProblem) else "reference solve"
        print(f"  {entry.name:<22} dim={base.dim} d1={base.d1} T={base.horizon_T:g} [{kind}]  {entry.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitlab", description="Operator-splitting convergence laboratory")
    commands = parser.add_subparsers(dest="command", required=True)

    weights = commands.add_parser("weights", help="print acceleration weights")
    weights.add_argument("--k", type=int, required=True)
    weights.add_argument("--variant", choices=["general", "strang"], default="general")
    weights.set_defaults(handler=cmd_weights)

    run = commands.add_parser("run", help="run an experiment file")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="CSV path (overrides output.path)")
    run.add_argument("--audit", action="store_true", help="rerun at substep_tol/10 and compare fitted orders")
    run.set_defaults(handler=cmd_run)

    problems = commands.add_parser("list-problems", help="list built-in problems")
    problems.set_defaults(handler=cmd_list_problems)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SplitLabError as e:
        logger.error(f"Command '{args.command}' failed: {e}", exc_info=True)
        print(f"❌ Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
