import argparse
import json
import logging
from pathlib import Path
from typing import List, Optional

from anisolab import __version__
from anisolab.config import settings
from anisolab.exceptions import ConfigError, ContractViolation, LabError
from anisolab.services.experiments import ExperimentRunner, load_config
from anisolab.utils.helpers import create_response, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONTRACT = 2
EXIT_CONFIG = 3

COMMANDS = {
    "strichartz": "1D Sobolev multiplier sweep of a half-line indicator",
    "multiplier": "anisotropic norm ratio sweep of a half-space or strip indicator",
    "lemmas": "per-resolution checks of the spectral and paraproduct toolbox",
    "kernel-decay": "wave-packet kernel maxima and decay exponents per leaf",
    "corpus": "write the test-function corpus and the leaf family to disk",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisolab",
        description="Numerical laboratory for anisotropic Besov norms and bounded multipliers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        command = sub.add_parser(name, help=text, description=text)
        command.add_argument("--config", type=str, default=None, help="INI experiment file")
        command.add_argument("--out", type=str, default=None, help=f"output directory (default: {settings.OUTPUT_DIR})")
        command.add_argument("--seed", type=int, default=None)
        command.add_argument("--workers", type=int, default=None)
        command.add_argument("--format", choices=("csv", "json"), default=None)
        command.add_argument("--log-level", type=str, default=settings.LOG_LEVEL)
    return parser


def run(args: argparse.Namespace) -> dict:
    config = load_config(
        args.config, args.command,
        seed=args.seed, workers=args.workers, output_dir=args.out, output_format=args.format,
    )
    runner = ExperimentRunner(config)
    out_dir = Path(config.output_dir)

    if args.command == "corpus":
        manifest = runner.build_corpus(out_dir)
        return create_response(True, f"corpus written to {out_dir}", {"files": len(manifest["members"])})

    records = runner.run()
    path = runner.write(records, out_dir)
    data = {"records": len(records), "output": str(path), "violations": runner.violations}
    if runner.violations:
        for violation in runner.violations:
            logger.error(f"❌ {violation}")
        summary = f"{len(runner.violations)} contract(s) violated"
        raise ContractViolation(summary, create_response(False, summary, data))
    logger.info(f"✅ {args.command}: {len(records)} records, all contracts hold")
    return create_response(True, f"{args.command} finished", data)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        response = run(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        print(json.dumps(create_response(False, f"config error: {e}")))
        return EXIT_CONFIG
    except ContractViolation as e:
        logger.error(f"Contract violation: {e}")
        print(json.dumps(e.response))
        return EXIT_CONTRACT
    except LabError as e:
        # a precondition the config did not rule out, e.g. a band range at the smallest N
        logger.error(f"Config error: {e}")
        print(json.dumps(create_response(False, f"config error: {e}")))
        return EXIT_CONFIG
    print(json.dumps(response))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
