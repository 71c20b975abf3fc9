"""Command-line entry point: ``chance-rrt {run,compare,sense-sweep}``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import DomainError, ScenarioError
from .harness import run_batch, sense_sweep, write_sweep_csv
from .planner import Mode
from .report import emit_report
from .scenario import builtin_scenarios, load_profile, load_scenario

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_IO = 2


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("list must not be empty")
    return vals


def _modes(text: str) -> list[Mode]:
    try:
        return [Mode(t.strip().lower()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"modes must be drawn from pu,cc,cl; got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chance-rrt",
        description="Perception-uncertainty-aware chance-constrained RRT experiments.",
        epilog=f"Bundled scenarios: {', '.join(builtin_scenarios())}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def batch_args(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file or bundled scenario name")
        p.add_argument("--trials", type=int, default=None, help="trial count (default: from scenario)")
        p.add_argument("--seed", type=int, default=None, help="base seed (default: from scenario)")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--no-svg", action="store_true", help="skip per-trial SVG plots")

    run = sub.add_parser("run", help="run one planner mode")
    batch_args(run)
    run.add_argument("--mode", type=Mode, choices=list(Mode), default=Mode.PU)

    cmp_ = sub.add_parser("compare", help="run several planner modes on paired seeds")
    batch_args(cmp_)
    cmp_.add_argument("--modes", type=_modes, default=[Mode.PU, Mode.CC, Mode.CL],
                      help="comma-separated subset of pu,cc,cl")

    sweep = sub.add_parser("sense-sweep", help="fused detection variance versus range and bearing")
    sweep.add_argument("--profile", required=True, help="noise profile JSON (or a scenario file)")
    sweep.add_argument("--out", required=True, type=Path, help="output directory")
    sweep.add_argument("--distances", type=_float_list, default=[5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
                       help="metres, comma-separated")
    sweep.add_argument("--azimuths", type=_float_list, default=[-60.0, -30.0, 0.0, 30.0, 60.0],
                       help="degrees, comma-separated")
    sweep.add_argument("--frames", type=int, default=500)
    sweep.add_argument("--seed", type=int, default=0)
    return parser


def _batch(args, modes: list[Mode]) -> int:
    scenario = load_scenario(args.scenario)
    if args.trials is not None and args.trials < 0:
        raise DomainError("--trials must be non-negative")
    metrics, traces = run_batch(scenario, modes, trials=args.trials, base_seed=args.seed)
    emit_report(metrics, traces, args.out, None if args.no_svg else scenario)
    for m in metrics:
        print(" ".join(f"{k}={v}" for k, v in zip(("mode", "succ1", "succ2", "succ3", "risk_max", "risk_avg",
                                                       "n_waypoints", "length_m"), m.row())))
    print(f"wrote {args.out / 'metrics.csv'}")
    return EXIT_OK


def _sweep(args) -> int:
    profile = load_profile(args.profile)
    if args.frames < 1:
        raise DomainError("--frames must be at least 1")
    cells = sense_sweep(profile, args.distances, [math.radians(a) for a in args.azimuths], args.frames, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_sweep_csv(cells, args.out / "sense_sweep.csv")
    print(f"wrote {path}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _batch(args, [args.mode])
        if args.command == "compare":
            return _batch(args, args.modes)
        return _sweep(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
