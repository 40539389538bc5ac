"""Command-line front end.

    tdlab <kind> --config experiment.cfg [--seed N] [--out DIR] [--workers N]

Exit codes: 0 success, 2 config error, 3 I/O error, 4 numerical failure of
an entire ensemble.
"""

import argparse
import sys

from .dynamics import DegenerateEnsembleError
from .harness import (KINDS, ConfigError, EnsembleFailureError, load_config,
                      run_experiment)

EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdlab",
        description="Transformer-encoder dynamical-system laboratory")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="|".join(KINDS))
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--out", default=None, help="override experiment.out")
        p.add_argument("--workers", type=int, default=None,
                       help="override experiment.workers (default TDLAB_WORKERS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, kind=args.kind, seed=args.seed,
                             out_dir=args.out, workers=args.workers)
        report = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EnsembleFailureError, DegenerateEnsembleError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key in sorted(report.summary):
        print(f"{key}: {report.summary[key]}")
    print(f"report: {report.kind} written to {config.out_dir} "
          f"({report.wall_clock:.2f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
