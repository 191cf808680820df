# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Configure logging for elkc."""

import logging
import logging.handlers
import os
import pathlib

LOG_DIR_ENV = "ELKC_LOG_DIR"
DEFAULT_LOG_FILE_DIR = pathlib.Path.home() / "elkc/log"
INFO_LOG_FILE_NAME = "info.log"
ERROR_LOG_FILE_NAME = "error.log"


def get_log_dir() -> pathlib.Path:
    """Get the directory the log files are written to.

    Returns:
        The log directory, taken from ELKC_LOG_DIR when set.
    """
    return pathlib.Path(os.environ.get(LOG_DIR_ENV, DEFAULT_LOG_FILE_DIR))


def configure(log_level: str | int) -> None:
    """Configure the global log configurations.

    Args:
        log_level: The logging verbosity level to apply.
    """
    log_dir = get_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    level: str | int = log_level
    if isinstance(log_level, str):
        level = int(log_level) if log_level.isdigit() else log_level.upper()
    log_handler = logging.FileHandler(filename=log_dir / INFO_LOG_FILE_NAME, encoding="utf-8")
    log_handler.setLevel(level)
    error_log_handler = logging.FileHandler(
        filename=log_dir / ERROR_LOG_FILE_NAME, encoding="utf-8"
    )
    error_log_handler.setLevel(logging.ERROR)
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    log_handler.setFormatter(formatter)
    error_log_handler.setFormatter(formatter)
    logging.basicConfig(
        level=level,
        handlers=(log_handler, error_log_handler),
        encoding="utf-8",
        force=True,
    )
