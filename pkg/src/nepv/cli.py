"""Command-line front end.

`nepv run <config>` executes a config file; `nepv table1|table2|table3`
run the shipped presets.  Every command writes a CSV, a .meta sidecar
echoing the resolved spec, and optionally a PNG of the same data.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
failure.
"""

import argparse
import sys
import time
from dataclasses import replace

from .config import PRESET_NAMES, ConfigError, parse_config, preset
from .experiments import run_experiment, write_outputs
from .problem import ContractViolationError, ScfDivergenceError

__all__ = ["main"]


def _add_common(parser):
    parser.add_argument("--out", help="output CSV path (default from the spec)")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--workers", type=int, default=1,
                        help="sweep-point parallelism (default 1)")
    parser.add_argument("--samples", type=int,
                        help="Monte-Carlo sample count override")
    parser.add_argument("--plot", action="store_true",
                        help="also render the figure next to the CSV")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nepv",
        description="Spectral bound experiments for eigenvector-dependent "
                    "nonlinear eigenvalue problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config file")
    run.add_argument("config", help="path to the INI experiment spec")
    _add_common(run)
    for name in PRESET_NAMES:
        p = sub.add_parser(name, help=f"run the {name} preset")
        _add_common(p)
    return parser


def _resolve_spec(args):
    if args.command == "run":
        spec = parse_config(args.config)
    else:
        spec = preset(args.command)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.samples is not None:
        updates["samples"] = args.samples
    if args.out is not None:
        updates["out"] = args.out
    return replace(spec, **updates) if updates else spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = _resolve_spec(args)
    except FileNotFoundError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2

    start = time.perf_counter()
    try:
        rows = run_experiment(spec, workers=args.workers)
    except (ContractViolationError, ScfDivergenceError,
            ValueError, ArithmeticError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 3

    try:
        write_outputs(spec, rows, spec.out, time.perf_counter() - start)
        if args.plot:
            from .figures import render_figure

            png = render_figure(spec, rows, spec.out)
            print(f"wrote {spec.out}, {spec.out}.meta, {png}")
        else:
            print(f"wrote {spec.out}, {spec.out}.meta")
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
