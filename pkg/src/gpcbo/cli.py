"""Command-line entry point.

    gpcbo run --config FILE [--problem P] [--seed S] [--out DIR] [--repeats R]
    gpcbo plot RUN_DIR [RUN_DIR ...]

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import json
import logging
import sys

from gpcbo.config import PROBLEMS, load, resolve
from gpcbo.errors import ConditioningError, ConfigError, NumericalFailure, SimulationBlowUp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("gpcbo")


def build_parser():
    parser = argparse.ArgumentParser(prog="gpcbo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON artifacts")
    run.add_argument("--config", help="YAML scenario file")
    run.add_argument("--problem", choices=PROBLEMS)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--repeats", type=int)
    run.add_argument("--plot", action="store_true", help="render SVG figures after the run")

    plot = sub.add_parser("plot", help="render SVG figures from finished run directories")
    plot.add_argument("run_dirs", nargs="+", metavar="RUN_DIR")
    return parser


def _run(args):
    # imported lazily so `gpcbo --help` stays fast
    from gpcbo.experiment import run_experiment

    overrides = {
        "problem": args.problem,
        "seed": args.seed,
        "out": args.out,
        "repeats": args.repeats,
    }
    cfg = load(args.config, overrides) if args.config else resolve({}, overrides)
    summary = run_experiment(cfg)
    print(json.dumps({k: summary[k] for k in ("problem", "final_costs", "mean_final_cost")}))
    if args.plot:
        _plot([cfg["out"]])
    return EXIT_OK


def _plot(run_dirs):
    from gpcbo.plotting import emit_plots

    for path in emit_plots(run_dirs):
        print(path)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _run(args)
        return _plot(args.run_dirs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditioningError as exc:
        print(f"numerical failure in {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SimulationBlowUp as exc:
        print(f"numerical failure in simulation: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalFailure as exc:
        print(f"numerical failure in optimizer: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        if args.command != "plot":
            raise
        # malformed CSV artifacts
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
