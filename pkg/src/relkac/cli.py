'''
Command line entry point: relkac laplace|moments|compare|limit|sample --config FILE

Exit codes: 0 when every check passes, 1 when a check fails, 2 on an execution error.
'''

import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import ENV_LOG_LEVEL, EXPERIMENTS, ExperimentConfig, apply_overrides, load_config
from .errors import ConfigError, RelKacError
from .experiments import RUNNERS, emit_frame, emit_results, run_sample_export

log = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relkac",
        description="Monte Carlo and spectral checks for relativistic subordinators and their Feynman-Kac formulas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", help="YAML experiment file; defaults are used when omitted")
        cmd.add_argument("--seed", type=int, help="override the experiment seed")
        cmd.add_argument("--workers", type=int, help="process pool size")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    return parser


def configure_logging(verbose: int, environ=None) -> None:
    environ = os.environ if environ is None else environ
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, environ.get(ENV_LOG_LEVEL, "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def load_run_config(args: argparse.Namespace, environ=None) -> ExperimentConfig:
    """
    The experiment config for a parsed command line.

    Raises:
        ConfigError: If the file names a different experiment than the subcommand.
    """
    if args.config:
        config = load_config(args.config)
        if config.experiment != args.command:
            raise ConfigError(f"{args.config}: experiment is '{config.experiment}', not '{args.command}'")
    else:
        config = ExperimentConfig(experiment=args.command)
    return apply_overrides(config, environ, seed=args.seed, workers=args.workers, out=args.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = load_run_config(args)
        if args.command == "sample":
            frame = run_sample_export(config)
            emit_frame(frame, config.out, "sample", {"experiment": "sample", "seed": config.seed, "config": config.to_dict()})
            return EXIT_PASS
        table = RUNNERS[args.command](config)
        emit_results(table, config.out, config)
    except (RelKacError, OSError) as e:
        log.error("%s", e)
        return EXIT_ERROR
    except Exception:
        log.exception("unexpected error in %s", args.command)
        return EXIT_ERROR
    failed = [c.name for c in table.checks if not c.passed]
    if failed:
        log.warning("%d check(s) failed: %s", len(failed), ", ".join(failed))
        return EXIT_FAIL
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
