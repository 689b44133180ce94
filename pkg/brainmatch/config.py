"""
Configuration module for the brainmatch pipeline.

Loads and validates environment variables for worker lanes, metric defaults,
synthetic workload parameters, and logging.
"""

import os
from typing import Tuple

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class ConfigurationError(Exception):
    """Raised when required configuration is missing or invalid."""

    pass


def parse_dims(text: str) -> Tuple[int, int, int]:
    """
    Parses an "NX,NY,NZ" string into a voxel-count triple.

    Args:
        text: Comma-separated extents, e.g. "64,64,64"

    Returns:
        Tuple[int, int, int]: (nx, ny, nz)

    Raises:
        ValueError: If the text does not hold exactly three integers
    """
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) != 3:
        raise ValueError(f"dims must be NX,NY,NZ, got: {text!r}")
    nx, ny, nz = (int(p) for p in parts)
    return nx, ny, nz


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in ("true", "yes", "1")


# Execution parameters
# 0 partitions means one partition per worker lane
WORKERS: int = int(os.getenv("BRAINMATCH_WORKERS", str(os.cpu_count() or 1)))
PARTITIONS: int = int(os.getenv("BRAINMATCH_PARTITIONS", "0"))

# Matching defaults
METRIC: str = os.getenv("BRAINMATCH_METRIC", "ssd").lower()
DICE_THRESHOLD: float = float(os.getenv("BRAINMATCH_DICE_THRESHOLD", "0.0"))
TEMPLATE_THRESHOLD: float = float(os.getenv("BRAINMATCH_TEMPLATE_THRESHOLD", "0.5"))
ZSCORE: bool = _flag("BRAINMATCH_ZSCORE", "false")

# Benchmark parameters
BENCH_REPS: int = int(os.getenv("BRAINMATCH_BENCH_REPS", "5"))

# Synthetic workload defaults (84 components mirrors the MELODIC output size)
SEED: int = int(os.getenv("BRAINMATCH_SEED", "42"))
N_COMPONENTS: int = int(os.getenv("BRAINMATCH_N_COMPONENTS", "84"))
DIMS_TEXT: str = os.getenv("BRAINMATCH_DIMS", "64,64,64")
NOISE_SIGMA: float = float(os.getenv("BRAINMATCH_NOISE_SIGMA", "0.1"))

# NIfTI output
GZIP_LEVEL: int = int(os.getenv("BRAINMATCH_GZIP_LEVEL", "6"))

# Logging
LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE: str = os.getenv("LOG_FILE", "")
LOG_DIR: str = os.getenv("LOG_DIR", "logs")


def validate_config() -> None:
    """
    Validates the environment-derived settings.

    Raises:
        ConfigurationError: If any setting is out of range.
    """
    errors = []

    if WORKERS < 1:
        errors.append(f"BRAINMATCH_WORKERS must be >= 1, got: {WORKERS}")

    if PARTITIONS < 0:
        errors.append(f"BRAINMATCH_PARTITIONS must be >= 0, got: {PARTITIONS}")

    if METRIC not in ("ssd", "ncc", "dice"):
        errors.append(f"BRAINMATCH_METRIC must be one of ssd, ncc, dice, got: {METRIC}")

    if BENCH_REPS < 1:
        errors.append(f"BRAINMATCH_BENCH_REPS must be >= 1, got: {BENCH_REPS}")

    if N_COMPONENTS < 1:
        errors.append(f"BRAINMATCH_N_COMPONENTS must be >= 1, got: {N_COMPONENTS}")

    try:
        dims = parse_dims(DIMS_TEXT)
        if min(dims) < 1:
            errors.append(f"BRAINMATCH_DIMS must be positive, got: {DIMS_TEXT}")
    except ValueError as e:
        errors.append(f"BRAINMATCH_DIMS is invalid: {e}")

    if NOISE_SIGMA < 0:
        errors.append(f"BRAINMATCH_NOISE_SIGMA must be non-negative, got: {NOISE_SIGMA}")

    if not 0 <= GZIP_LEVEL <= 9:
        errors.append(f"BRAINMATCH_GZIP_LEVEL must be between 0 and 9, got: {GZIP_LEVEL}")

    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"LOG_LEVEL is not a logging level, got: {LOG_LEVEL}")

    # If there are any errors, raise exception with all messages
    if errors:
        error_message = "Configuration validation failed:\n\n" + "\n\n".join(errors)
        raise ConfigurationError(error_message)


# Validate configuration on module import
validate_config()
