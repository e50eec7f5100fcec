import argparse
import logging
from dataclasses import replace
from typing import List, Optional

from .. import __version__
from ..errors import BnkfError, PropertyCheckFailure
from ..simkit import NOISE_TIERS
from .commands import RunLock, cmd_eval, cmd_generate, cmd_timing, cmd_train
from .config import RunConfig, load_config


__all__ = (
    "EXIT_OK",
    "EXIT_CHECK_FAILED",
    "EXIT_USAGE",
    "EXIT_INTERNAL",
    "build_parser",
    "main",
)


LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config or a run manifest to replay")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--methods", help="comma-separated subset of ekf,ukf,bnn,bnkf,bnkfe")
    common.add_argument("--tier", choices=list(NOISE_TIERS), help="restrict the run to one noise tier")
    common.add_argument("--check", action="store_true", help="evaluate the acceptance properties (eval)")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="bnkf",
        description="Radar tracking benchmark of Kalman filters and Bayesian-network hybrids",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("generate", parents=[common], help="simulate trajectories and build the datasets")
    sub.add_parser("train", parents=[common], help="train the per-fold networks")
    sub.add_parser("eval", parents=[common], help="benchmark every method and write the report")
    sub.add_parser("timing", parents=[common], help="time single-trajectory inference")
    return parser


def _configure(args) -> RunConfig:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.tier is not None:
        overrides["tiers"] = [args.tier]
    if args.methods is not None:
        overrides["methods"] = [m.strip().lower() for m in args.methods.split(",") if m.strip()]
    return replace(config, **overrides).validate()


def _dispatch(args, config: RunConfig):
    if args.command == "generate":
        return cmd_generate(config, args.force)
    if args.command == "train":
        return cmd_train(config, args.force)
    if args.command == "eval":
        return cmd_eval(config, args.check)
    return cmd_timing(config)


def main(argv: Optional[List[str]] = None) -> int:
    '''
    Entry point of the ``bnkf`` console script.

    Returns
    -------
    code : int
        0 on success, 1 when a ``--check`` property fails, 2 on usage,
        configuration or missing-artifact problems (argparse exits with 2
        on its own), 3 on any other error, logged with its traceback
    '''
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = _configure(args)
        with RunLock(config.out):
            _dispatch(args, config)
    except PropertyCheckFailure as e:
        LOGGER.error("%s", e)
        return EXIT_CHECK_FAILED
    except BnkfError as e:
        LOGGER.error("%s", e)
        return EXIT_USAGE
    except Exception:
        LOGGER.exception("bnkf %s failed", args.command)
        return EXIT_INTERNAL
    return EXIT_OK
