"""
Logging configuration for spinlab.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

from .config import get_config

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """Set up a logger with the specified name.

    Handlers are attached once per logger name; records go to stderr so that
    command output on stdout stays machine readable.
    """
    logger = logging.getLogger(name)
    config = get_config()

    log_level = level or config.get("logging.level", "INFO")
    log_format = config.get("logging.format", DEFAULT_FORMAT)
    log_file = config.get("logging.file", "")

    if not logger.handlers:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(log_format))
        logger.addHandler(console_handler)

        if log_file:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(logging.Formatter(log_format))
            logger.addHandler(file_handler)

        logger.propagate = False

    logger.setLevel(getattr(logging, str(log_level).upper(), logging.INFO))
    return logger


def set_level(level: str) -> None:
    """Change the level of every spinlab logger (CLI ``--log-level``)."""
    numeric = getattr(logging, level.upper(), None)
    if numeric is None:
        raise ValueError(f"Unknown log level: {level}")
    get_config().set("logging.level", level.upper())
    for name, existing in logging.root.manager.loggerDict.items():
        if name.startswith("spinlab") and isinstance(existing, logging.Logger):
            existing.setLevel(numeric)


get_logger = setup_logger
