import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from tandem_errors import ConfigValidationError
from tandem_model import NetworkParams, SingleServerParams

# Load environment variables
load_dotenv()

logger = logging.getLogger("Tandem.Config")


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in {"1", "true", "yes"}


class Config:
    """Toolkit-wide settings, overridable from the environment or a .env file"""

    # ================== Logging & Output ==================
    LOG_LEVEL = os.getenv("RSC_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIGITS = int(os.getenv("RSC_OUTPUT_DIGITS", "12"))
    SCHEMA_VERSION = "1"

    # ================== Parallelism ==================
    # 0 means "derive from the machine"
    THREADS = int(os.getenv("RSC_THREADS", "0"))
    PARALLEL_ENABLED = _env_flag("RSC_PARALLEL", "true")

    # ================== Randomness ==================
    DEFAULT_SEED = int(os.getenv("RSC_SEED", "20240101"))

    # ================== Dynamic programming ==================
    DP_TOL = float(os.getenv("RSC_DP_TOL", "1e-10"))
    DP_MAX_ITER = int(os.getenv("RSC_DP_MAX_ITER", "1000000"))

    # ================== Viscosity verification ==================
    VISCOSITY_SAMPLES = int(os.getenv("RSC_VISCOSITY_SAMPLES", "10000"))
    VISCOSITY_TOL = float(os.getenv("RSC_VISCOSITY_TOL", "1e-9"))
    EXTREME_TOL = float(os.getenv("RSC_EXTREME_TOL", "1e-12"))
    STRICT_MARGIN = 1e-8
    MAX_REJECTION_ROUNDS = 50

    # ================== Hamiltonian ==================
    ISAACS_POINTS = int(os.getenv("RSC_ISAACS_POINTS", "33"))
    ISAACS_LOG_RADIUS = 3.0
    FREE_TOL = 1e-12

    # ================== Value function ==================
    TIE_RTOL = 1e-12

    # ================== Monte Carlo ==================
    MC_PATHS = int(os.getenv("RSC_MC_PATHS", "100000"))
    RNG_BLOCK = 64

    @classmethod
    def worker_count(cls) -> int:
        """Worker cap for thread pools: RSC_THREADS if set, otherwise the CPU count"""
        if not cls.PARALLEL_ENABLED:
            return 1
        if cls.THREADS > 0:
            return cls.THREADS
        try:
            import psutil

            return max(1, psutil.cpu_count(logical=True) or 1)
        except ImportError:
            logger.warning("psutil not available - running single-threaded")
            return 1

    @classmethod
    def validate_configuration(cls) -> bool:
        """Validate configuration and log any issues"""
        issues = []

        if cls.DP_TOL <= 0:
            issues.append("RSC_DP_TOL must be positive")
        if cls.DP_MAX_ITER < 1:
            issues.append("RSC_DP_MAX_ITER must be at least 1")
        if cls.VISCOSITY_SAMPLES < 1:
            issues.append("RSC_VISCOSITY_SAMPLES must be at least 1")
        if cls.VISCOSITY_TOL < 0 or cls.EXTREME_TOL < 0:
            issues.append("verification tolerances must be nonnegative")
        if cls.ISAACS_POINTS < 3 or cls.ISAACS_POINTS % 2 == 0:
            issues.append("RSC_ISAACS_POINTS must be an odd number >= 3")
        if cls.MC_PATHS < 2:
            issues.append("RSC_MC_PATHS must be at least 2")
        if cls.THREADS < 0:
            issues.append("RSC_THREADS must be nonnegative")
        if cls.OUTPUT_DIGITS < 1:
            issues.append("RSC_OUTPUT_DIGITS must be positive")

        if issues:
            logger.error("❌ Configuration validation failed:")
            for issue in issues:
                logger.error(f"  • {issue}")
            return False
        logger.debug("✅ Configuration validation passed")
        return True


# ═══════════════════════════════════════════════════════════════════════════
# RUN CONFIGURATION
# ═══════════════════════════════════════════════════════════════════════════

# Reference tandem instance used when no --config document is given
DEFAULT_INSTANCE = {"J": 2, "lambda": 1.0, "mu": [2.0, 1.0], "z": [1.0, 1.0], "c": 1.0}
DEFAULT_SINGLE_SERVER_INSTANCE = {"J": 2, "lambda": [1.0, 1.0], "mu": [2.0, 2.0], "z": [1.0, 1.0], "c": 1.0}


@dataclass
class RunConfig:
    """Validated problem instance plus command-specific options"""

    params: Union[NetworkParams, SingleServerParams]
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_single_server(self) -> bool:
        return isinstance(self.params, SingleServerParams)

    def option(self, name: str, default: Any = None) -> Any:
        value = self.options.get(name)
        return default if value is None else value


def parse_config(document: str, options: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Parse a JSON instance document into a RunConfig.

    A document whose "lambda" is a list describes the multiclass single-server
    system; a scalar "lambda" describes the tandem network.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ConfigValidationError("document", f"malformed JSON ({e})") from e

    if not isinstance(data, dict):
        raise ConfigValidationError("document", "expected a JSON object")

    if isinstance(data.get("lambda"), list):
        params: Union[NetworkParams, SingleServerParams] = SingleServerParams.from_dict(data)
    else:
        params = NetworkParams.from_dict(data)

    logger.debug(f"Parsed instance: {params}")
    return RunConfig(params=params, options=dict(options or {}))


def load_config(
    path: Optional[str], options: Optional[Dict[str, Any]] = None, single_server: bool = False
) -> RunConfig:
    """Read the instance document from disk, or fall back to the reference instance"""
    if path is None:
        default = DEFAULT_SINGLE_SERVER_INSTANCE if single_server else DEFAULT_INSTANCE
        return parse_config(json.dumps(default), options)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config(f.read(), options)
    except OSError as e:
        raise ConfigValidationError("config", f"cannot read {path} ({e})") from e
