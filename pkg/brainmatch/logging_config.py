"""
Logging configuration module for the brainmatch pipeline.

Provides centralized logging setup with consistent formatting,
optional rotating file output, and a run-id adapter for CLI invocations.
"""

import logging
import logging.handlers
import os
from typing import Optional


class RunContextFilter(logging.Filter):
    """
    Adds run_id to log records that were not emitted through a run adapter.
    """

    def filter(self, record):
        """Add run_id to record if not present."""
        if not hasattr(record, "run_id"):
            record.run_id = "N/A"
        return True


def setup_logging(
    log_level: str = "INFO", log_file: Optional[str] = None, log_dir: str = "logs"
) -> None:
    """
    Configures logging for the pipeline.

    Sets up:
    - Console handler at the requested level
    - File handler with rotation (if log_file specified)
    - Consistent format with timestamp, level and module

    Args:
        log_level: Default log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional log file name (e.g., 'brainmatch.log')
        log_dir: Directory for log files (default: 'logs')
    """
    if log_file and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    log_format = "[%(asctime)s] [%(levelname)-8s] [%(name)-20s] %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"
    formatter = logging.Formatter(log_format, datefmt=date_format)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)  # Capture all levels, handlers will filter

    # Remove existing handlers to avoid duplicates
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, log_level.upper()))
    console_handler.setFormatter(formatter)
    console_handler.addFilter(RunContextFilter())
    root_logger.addHandler(console_handler)

    if log_file:
        log_path = os.path.join(log_dir, log_file)

        # Max size: 10MB, keep 5 backup files
        file_handler = logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        file_handler.addFilter(RunContextFilter())
        root_logger.addHandler(file_handler)

    logging.getLogger("brainmatch").setLevel(logging.DEBUG)

    # The partitioned engine logs once per combinator; keep it quiet unless asked
    logging.getLogger("brainmatch.pardata").setLevel(
        logging.DEBUG if log_level.upper() == "DEBUG" else logging.INFO
    )

    # Reduce noise from third-party libraries
    logging.getLogger("numexpr").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)

    root_logger.info(
        f"Logging configured: level={log_level}, file={log_file or 'None'}"
    )


def get_logger_with_run(
    name: str, run_id: Optional[str] = None
) -> logging.LoggerAdapter:
    """
    Returns a logger adapter that tags every message with a run id.

    Args:
        name: Logger name (typically __name__)
        run_id: Identifier of the current CLI invocation

    Returns:
        logging.LoggerAdapter: Adapter whose records carry run_id

    Example:
        logger = get_logger_with_run(__name__, run_id)
        logger.info("Scoring components")  # Logged as "[run <id>] Scoring components"
    """
    logger = logging.getLogger(name)
    return _RunAdapter(logger, {"run_id": run_id or "N/A"})


class _RunAdapter(logging.LoggerAdapter):
    def process(self, msg, kwargs):
        kwargs.setdefault("extra", {}).update(self.extra)
        return f"[run {self.extra['run_id']}] {msg}", kwargs
