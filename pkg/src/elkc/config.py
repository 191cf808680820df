# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Module containing configurations."""

import itertools
import logging
from enum import Enum
from pathlib import Path

import yaml

from elkc.errors import ConfigError, IoError

logger = logging.getLogger(__name__)

SEED_ENV = "ELKC_SEED"
DEFAULT_SEED = 0

_LOG_LEVELS = (logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR)
LOG_LEVELS = tuple(
    str(level)
    for level in itertools.chain(
        _LOG_LEVELS,
        (logging.getLevelName(level) for level in _LOG_LEVELS),
        (logging.getLevelName(level).lower() for level in _LOG_LEVELS),
    )
)


class Distribution(str, Enum):
    """Value distributions of generated benchmark tensors.

    Attributes:
        GAUSSIAN: Standard normal values.
        SPARSE_GAUSSIAN: Standard normal values with a fraction zeroed out.
        ZEROS: All-zero values.
    """

    GAUSSIAN = "gaussian"
    SPARSE_GAUSSIAN = "sparse-gaussian"
    ZEROS = "zeros"

    @classmethod
    def from_str(cls, name: str) -> "Distribution":
        """Retrieve the distribution from its command line name.

        Args:
            name: The distribution name, case insensitive.

        Raises:
            ConfigError: If the name is not a known distribution.

        Returns:
            The matching distribution.
        """
        try:
            return cls(name.strip().lower())
        except ValueError as exc:
            raise ConfigError(f"Unknown distribution: {name}") from exc


class LrDecay(str, Enum):
    """Learning rate schedules of the training simulator.

    Attributes:
        COSINE: Cosine decay without restarts from base to final learning rate.
        CONSTANT: The base learning rate for every step.
    """

    COSINE = "cosine"
    CONSTANT = "constant"

    @classmethod
    def from_str(cls, name: str) -> "LrDecay":
        """Retrieve the schedule from its configuration name.

        Args:
            name: The schedule name, case insensitive.

        Raises:
            ConfigError: If the name is not a known schedule.

        Returns:
            The matching schedule.
        """
        try:
            return cls(name.strip().lower())
        except ValueError as exc:
            raise ConfigError(f"Unknown learning rate decay: {name}") from exc


def parse_key_value_lines(text: str) -> dict[str, object]:
    """Parse the flat key=value configuration format.

    Blank lines and lines starting with '#' are skipped. Values are typed as YAML scalars,
    so "4" is an integer, "0.9" a float, "true" a boolean and "3lc:1.75" a string.

    Args:
        text: The configuration file contents.

    Raises:
        ConfigError: If a line is not a key=value pair or a key repeats.

    Returns:
        The configuration values by key.
    """
    values: dict[str, object] = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw_value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"Line {line_no}: expected key=value, got {raw_line!r}")
        if key in values:
            raise ConfigError(f"Line {line_no}: duplicate key {key}")
        try:
            value = yaml.safe_load(raw_value.strip())
        except yaml.YAMLError as exc:
            raise ConfigError(f"Line {line_no}: invalid value for {key}") from exc
        if isinstance(value, (dict, list)):
            raise ConfigError(f"Line {line_no}: {key} must be a scalar value")
        values[key] = raw_value.strip() if value is None else value
    return values


def read_key_value_file(path: Path) -> dict[str, object]:
    """Read a flat key=value configuration file.

    Args:
        path: The configuration file path.

    Raises:
        IoError: If the file could not be read.

    Returns:
        The configuration values by key.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        logger.exception("Failed to read configuration file %s.", path)
        raise IoError(f"Failed to read configuration file {path}") from exc
    return parse_key_value_lines(text)
