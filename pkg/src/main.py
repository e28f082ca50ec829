import argparse
import logging
import logging.handlers
import sys
from typing import List, Optional

import torch
from pydantic import ValidationError

from src.commands import register_commands
from src.config import config
from src.const import APP_NAME, EXIT_RUNTIME, EXIT_USAGE, VERSION
from src.errors import RSENetError

logger = logging.getLogger(__name__)


def setup_logging(quiet: bool = False) -> None:
    config.log_dir.mkdir(parents=True, exist_ok=True)
    console = logging.StreamHandler(sys.stdout)
    console.setLevel(logging.WARNING if quiet else logging.NOTSET)
    handlers = [
        console,
        logging.handlers.RotatingFileHandler(
            config.log_dir / f"{APP_NAME}.log", maxBytes=1024 * 1024, backupCount=10, encoding="utf-8"
        ),
    ]
    logging.basicConfig(
        handlers=handlers,
        level=config.log_level.upper(),
        style="{",
        format="[{asctime}] {levelname} ({name}): {message}",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME, description="2.5D residual squeeze-and-excitation network for LV myocardium segmentation"
    )
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {VERSION}")
    parser.add_argument("--seed", type=int, default=0, help="seed for phantom generation and the dataset split")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors to the console")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and return its exit status: 0 on success, 2 for usage and validation
    errors, 3 for runtime and numerical failures.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.quiet)
    torch.set_num_threads(config.torch_threads)

    try:
        return args.handler(args)
    except RSENetError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except ValidationError as e:
        for error in e.errors():
            field = ".".join(str(part) for part in error["loc"]) or "<root>"
            logger.error(f"{args.command}: invalid {field}: {error['msg']}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"{args.command}: I/O error: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
