#!/usr/bin/env python3
"""
Command-line front end for the workbench.

    conserva run <spec.json> [--out DIR] [--jobs N] [--debug]
    conserva constant <tableau> <mu...>          (mu may be written 0.25x8)
    conserva schedule <tableau> <mu> <n>
    conserva list

Exit codes: 0 success, 2 invalid document or unknown tableau, 3 numerical failure.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional, get_args

# Add the parent directory to the Python path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.conserva_errors import ConservaError, SpecValidationError, UnknownTableauError
from app.experiments import STUDIES_BY_PROBLEM, run_experiment
from app.newton import InnerMethod
from app.pseudo_time import modification_constant, root_first_schedule, stability_root
from app.run_persistence import RunPersistence
from app.spec_validation import ExperimentSpecValidator
from app.tableau_registry import TableauRegistry
from app.telemetry import log_info, setup_logfire
from app.workbench_config import WorkbenchSettings, load_settings

EXIT_INVALID = 2
EXIT_FAILED = 3


def parse_mus(tokens: List[str]) -> List[float]:
    """Pseudo-time steps; 'MUxN' repeats MU N times"""
    mus: List[float] = []
    for token in tokens:
        value, sep, count = token.lower().replace("×", "x").partition("x")
        try:
            mu = float(value)
            repeat = int(count) if sep else 1
        except ValueError:
            raise SpecValidationError(f"Cannot read pseudo-time step '{token}'",
                                      suggestions=["Write steps as numbers, e.g. 0.25 or 0.25x8"])
        if repeat < 1:
            raise SpecValidationError(f"Repeat count must be positive in '{token}'")
        mus.extend([mu] * repeat)
    return mus


def _registry(settings: WorkbenchSettings, debug: bool = False) -> TableauRegistry:
    return TableauRegistry(settings.resolve(settings.tableaus.local_dir), debug=debug)


def cmd_run(args, settings: WorkbenchSettings) -> int:
    registry = _registry(settings, args.debug)
    spec_path = Path(args.spec)
    spec = ExperimentSpecValidator(registry, settings).load(spec_path)
    jobs = args.jobs or settings.experiments.default_jobs

    log_info("Starting experiment", name=spec.name, problem=spec.problem, study=spec.study, jobs=jobs)
    result = run_experiment(spec, registry, settings, jobs)

    persistence = RunPersistence(settings.output_dir(args.out), write_report=settings.output.write_report)
    manifest = persistence.save(spec, result)

    print(f"✅ {spec.name}: {spec.problem}/{spec.study} in {result.wall_time:.2f}s")
    for key, value in result.summary.items():
        print(f"   {key}: {value}")
    for name, path in manifest.outputs.items():
        print(f"   {name} -> {path}")
    return 0


def cmd_constant(args, settings: WorkbenchSettings) -> int:
    tab = _registry(settings).get(args.tableau)
    c = modification_constant(tab, parse_mus(args.mus))
    print(f"{c:.12g}")
    return 0


def cmd_schedule(args, settings: WorkbenchSettings) -> int:
    tab = _registry(settings).get(args.tableau)
    solver = settings.solvers
    schedule = root_first_schedule(tab, args.mu, args.n, solver.root_bracket_upper, solver.root_scan_points)
    print(" ".join(f"{mu:.12g}" for mu in schedule.mus))
    print(f"c = {schedule.c:.12g}  (N = {schedule.N}, pseudo time {schedule.pseudo_time_reached:.12g})")
    return 0


def cmd_list(args, settings: WorkbenchSettings) -> int:
    registry = _registry(settings)
    print("Inner solvers:")
    print("  " + ", ".join(get_args(InnerMethod)))

    print("\nTableaus:")
    for name in registry.names():
        tab = registry.get(name)
        root = stability_root(tab, settings.solvers.root_bracket_upper, settings.solvers.root_scan_points)
        root_text = f"root mu = {root:.10g}" if root is not None else "no real root"
        print(f"  {name:<10} s={tab.s}  {root_text}")

    print("\nStudies:")
    for problem, studies in STUDIES_BY_PROBLEM.items():
        print(f"  {problem:<13} {', '.join(studies)}")

    specs_dir = settings.resolve(settings.experiments.specs_dir)
    print(f"\nBundled experiments ({specs_dir}):")
    for path in sorted(specs_dir.glob("*.json")):
        print(f"  {path.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conserva", description="Conservation-law solver workbench")
    parser.add_argument("--debug", action="store_true", help="console logging and verbose errors")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run an experiment document")
    run.add_argument("spec", help="path to an experiment JSON document")
    run.add_argument("--out", help="output base directory (overrides CONSERVA_OUT)")
    run.add_argument("--jobs", type=int, help="parallel sweep members")
    run.add_argument("--debug", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(handler=cmd_run)

    constant = commands.add_parser("constant", help="modification constant c of a schedule")
    constant.add_argument("tableau", help="tableau name or JSON file")
    constant.add_argument("mus", nargs="+", help="pseudo-time steps, e.g. 0.05x4")
    constant.set_defaults(handler=cmd_constant)

    schedule = commands.add_parser("schedule", help="root-first schedule with c = 1")
    schedule.add_argument("tableau", help="tableau name or JSON file")
    schedule.add_argument("mu", type=float, help="tail step size")
    schedule.add_argument("n", type=int, help="tail length")
    schedule.set_defaults(handler=cmd_schedule)

    listing = commands.add_parser("list", help="solvers, tableaus, studies and bundled experiments")
    listing.set_defaults(handler=cmd_list)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """CLI interface"""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = load_settings()
    setup_logfire(settings, debug=args.debug)

    try:
        return args.handler(args, settings)
    except (SpecValidationError, UnknownTableauError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INVALID
    except ConservaError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as e:
        if args.debug:
            raise
        print(f"❌ Unexpected {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
