# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Module containing error definitions."""


class ElkcBaseError(Exception):
    """Represents an error with any elkc related executions."""


class FormatError(ElkcBaseError):
    """Represents a malformed tensor file, blob container or encoded byte stream."""


class IoError(ElkcBaseError):
    """Represents an error while reading or writing a file."""


class ShapeError(ElkcBaseError, ValueError):
    """Represents a tensor whose shape does not match the context serving it."""


class NonFiniteError(ElkcBaseError, ValueError):
    """Represents a NaN or infinite value offered to a codec."""


class InvalidSymbolError(ElkcBaseError, ValueError):
    """Represents a value outside an encoder's input alphabet."""


class ConfigError(ElkcBaseError, ValueError):
    """Represents an invalid configuration value."""


class EmptyError(ElkcBaseError, ValueError):
    """Represents an aggregate requested over no inputs."""


class DivergenceError(ElkcBaseError):
    """Represents a training run whose loss became non-finite."""
