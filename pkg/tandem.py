"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem.py
DESCRIPTION: Main entry point - command router for the tandem overflow toolkit
USAGE: python tandem.py [--config FILE] [--out FILE] <command> [options]
       python tandem.py roots                        # beta_i table
       python tandem.py value --at 0,0.9             # V(x) and the bottleneck
       python tandem.py check-pde --resolution 21    # viscosity checks
       python tandem.py solve-dp --n 16 --warm       # pre-limit value
       python tandem.py simulate --n 8 --is          # rare-event estimate
═══════════════════════════════════════════════════════════════════════════════
"""

import argparse
import logging
import sys
from typing import List, Optional

from tandem_commands import CommandManager
from tandem_config import Config, load_config
from tandem_errors import TandemError

logger = logging.getLogger("Tandem")

EXIT_OK = 0
EXIT_VALIDATION = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="instance document (JSON)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="write output here instead of stdout")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser(manager: CommandManager) -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="tandem",
        description="Risk-sensitive buffer-overflow control of tandem queues",
        parents=[common],
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    manager.register_parsers(subparsers, parents=[common])
    return parser


def setup_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="[%(asctime)s] %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


# ═══════════════════════════════════════════════════════════════════════════
# MAIN ENTRY POINT
# ═══════════════════════════════════════════════════════════════════════════

def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    manager = CommandManager()
    manager.load_commands()
    parser = build_parser(manager)
    args = parser.parse_args(argv)

    setup_logging(getattr(args, "log_level", None) or Config.LOG_LEVEL)

    if not args.command:
        parser.print_help()
        print(f"\n💡 Available commands: {', '.join(manager.get_loaded_commands())}\n")
        return EXIT_VALIDATION

    if not Config.validate_configuration():
        return EXIT_VALIDATION

    logger.debug(f"Worker cap: {Config.worker_count()}")
    try:
        command = manager.commands[args.command]
        run_config = load_config(
            getattr(args, "config", None),
            options=vars(args),
            single_server=command.instance == "single-server",
        )
        return manager.dispatch(args.command, args, run_config)
    except TandemError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
