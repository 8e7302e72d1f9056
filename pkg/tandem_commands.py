"""
tandem_commands.py
──────────────────────────────────────────────
Subcommand plugins: base class, discovery and output helpers
"""

import argparse
import importlib
import inspect
import json
import logging
import os
import pkgutil
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from tandem_config import Config, RunConfig
from tandem_errors import ConfigValidationError, DimensionError, TandemError

logger = logging.getLogger("Tandem.Commands")


class BaseCommand:
    """Base class for all subcommands."""

    name: str = "base"
    help: str = ""
    # documents this command accepts: "tandem" or "single-server"
    instance: str = "tandem"

    def add_arguments(self, parser: argparse.ArgumentParser):
        """Override to add command-specific flags"""

    def run(self, args: argparse.Namespace, run_config: RunConfig) -> int:
        """Override in child class; returns the exit status"""
        raise NotImplementedError


class CommandManager:
    def __init__(self, command_dir: Optional[str] = None):
        self.command_dir = command_dir or os.path.join(os.path.dirname(os.path.abspath(__file__)), "commands")
        self.commands: Dict[str, BaseCommand] = {}

    def load_commands(self):
        """Import every module in the commands package and register its BaseCommand subclasses"""
        if not os.path.isdir(self.command_dir):
            logger.warning(f"Command directory not found: {self.command_dir}")
            return

        logger.debug(f"🔍 Loading commands from: {self.command_dir}")
        for _, module_name, _ in pkgutil.iter_modules([self.command_dir]):
            full_name = f"commands.{module_name}"
            try:
                module = importlib.import_module(full_name)
            except ImportError as e:
                logger.error(f"Failed to load command module {module_name}: {e}")
                continue
            for _, obj in inspect.getmembers(module, inspect.isclass):
                if issubclass(obj, BaseCommand) and obj is not BaseCommand and obj.__module__ == full_name:
                    instance = obj()
                    self.commands[instance.name] = instance
                    logger.debug(f"✅ Loaded command: {instance.name}")

    def get_loaded_commands(self) -> List[str]:
        return sorted(self.commands)

    def register_parsers(self, subparsers, parents: Sequence[argparse.ArgumentParser] = ()):
        for name in self.get_loaded_commands():
            command = self.commands[name]
            sub = subparsers.add_parser(name, help=command.help, parents=list(parents))
            command.add_arguments(sub)

    def dispatch(self, name: str, args: argparse.Namespace, run_config: RunConfig) -> int:
        command = self.commands.get(name)
        if command is None:
            raise ConfigValidationError("command", f"unknown command {name!r}")
        if command.instance == "single-server" and not run_config.is_single_server:
            raise ConfigValidationError("config", f"'{name}' needs a single-server document (lambda given as a list)")
        if command.instance == "tandem" and run_config.is_single_server:
            raise ConfigValidationError("config", f"'{name}' needs a tandem document (scalar lambda)")
        logger.info(f"🧩 Running command: {name}")
        try:
            return command.run(args, run_config)
        except TandemError:
            raise
        except (OSError, ValueError) as e:
            raise TandemError(f"{name}: {e}") from e


# ═══════════════════════════════════════════════════════════════════════════
# PARSING AND OUTPUT HELPERS
# ═══════════════════════════════════════════════════════════════════════════

def parse_vector(text: str, J: int, field: str) -> np.ndarray:
    """'0.5,0.25' -> array([0.5, 0.25]) with a length check"""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigValidationError(field, f"expected comma-separated numbers, got {text!r}")
    if len(values) != J:
        raise DimensionError(J, len(values), field)
    return np.array(values)


def parse_int_list(text: str, field: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigValidationError(field, f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise ConfigValidationError(field, "expected positive integers")
    return values


def _plain(obj: Any, digits: int) -> Any:
    """JSON-ready copy with floats cut to `digits` significant digits"""
    if isinstance(obj, dict):
        return {str(k): _plain(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v, digits) for v in items]
    if isinstance(obj, np.ndarray):
        return [_plain(v, digits) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
        return float(f"{value:.{digits}g}")
    if hasattr(obj, "value") and not callable(obj.value):
        return obj.value
    return obj


def emit_json(document: Dict[str, Any], out: Optional[str] = None):
    payload = {"schema_version": Config.SCHEMA_VERSION, **_plain(document, Config.OUTPUT_DIGITS)}
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info(f"💾 Wrote {out}")
    else:
        sys.stdout.write(text)


def emit_csv(frame: pd.DataFrame, out: Optional[str] = None):
    options = dict(index=False, float_format=f"%.{Config.OUTPUT_DIGITS}g", lineterminator="\n")
    if out:
        frame.to_csv(out, encoding="utf-8", **options)
        logger.info(f"💾 Wrote {out} ({len(frame)} rows)")
    else:
        frame.to_csv(sys.stdout, **options)
