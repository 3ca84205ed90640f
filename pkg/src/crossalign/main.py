from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from crossalign import __version__
from crossalign.commands import get_command, get_commands
from crossalign.config import RunConfig, load_run_config, set_config
from crossalign.exceptions import CrossAlignError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossalign",
        description="Contrastive sequence/structure embedding alignment.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="KEY=value run config file (or set CROSSALIGN_CONFIG)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    subparsers = parser.add_subparsers(dest="command_name", metavar="COMMAND", required=True)
    for cmd in get_commands():
        sub = subparsers.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        if cmd.configure is not None:
            cmd.configure(sub)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=level,
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        overrides = {k: v for k, v in vars(args).items() if k in RunConfig.model_fields}
        cfg = load_run_config(args.config, overrides)
        set_config(cfg)
        get_command(args.command_name).handler(args, cfg)
    except CrossAlignError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
