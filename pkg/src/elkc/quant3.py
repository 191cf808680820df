# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Three-value quantization with sparsity multiplication and error accumulation.

A tensor is mapped to values in {-1, 0, 1} and one scalar magnitude m = max(|t|) * s. The
sparsity multiplier s (1 <= s < 2) widens the interval that rounds to zero, trading
quantization accuracy for zero runs that the encoders compress well. The error
accumulation context keeps what quantization lost and adds it to the next input.
"""

import copy
import dataclasses
import logging
import math
from typing import Sequence

import numpy as np
import numpy.typing as npt
from typing_extensions import Self

from elkc.errors import ConfigError, NonFiniteError, ShapeError
from elkc.tensor import DenseTensor

logger = logging.getLogger(__name__)

MIN_SPARSITY = 1.0
MAX_SPARSITY = 2.0


@dataclasses.dataclass(frozen=True)
class QuantConfig:
    """The 3-value quantization configuration.

    Attributes:
        s: The sparsity multiplier, 1 <= s < 2.
    """

    s: float = 1.0

    def __post_init__(self) -> None:
        """Validate the sparsity multiplier.

        Raises:
            ConfigError: If s is outside [1, 2).
        """
        # s is applied as a 32-bit float
        if not MIN_SPARSITY <= np.float32(self.s) < MAX_SPARSITY:
            raise ConfigError(f"Sparsity multiplier must be within [1, 2), got {self.s}")


@dataclasses.dataclass(frozen=True, eq=False)
class TernaryTensor:
    """A tensor of values in {-1, 0, 1} scaled by one magnitude.

    Attributes:
        dims: The shape.
        values: The flattened ternary values, read-only.
        m: The non-negative magnitude each non-zero value stands for.
    """

    dims: tuple[int, ...]
    values: npt.NDArray[np.int8]
    m: float

    def __post_init__(self) -> None:
        """Validate and freeze the tensor contents.

        Raises:
            ShapeError: If the value count does not match the shape.
            ValueError: If a value or the magnitude is out of range.
        """
        dims = tuple(int(dim) for dim in self.dims)
        values = np.array(self.values, dtype=np.int8, copy=True).reshape(-1)
        if values.size != math.prod(dims):
            raise ShapeError(f"Value count {values.size} does not match dimensions {dims}")
        if values.size and (values.min() < -1 or values.max() > 1):
            raise ValueError("Ternary values must be within {-1, 0, 1}")
        m = float(np.float32(self.m))
        if not math.isfinite(m) or m < 0:
            raise ValueError(f"Magnitude must be finite and non-negative, got {self.m}")
        if m == 0 and values.any():
            raise ValueError("A zero magnitude requires all-zero values")
        values.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "m", m)

    @property
    def size(self) -> int:
        """The number of elements."""
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        """Compare shapes, values and magnitudes.

        Args:
            other: The object to compare with.

        Returns:
            Whether both tensors are identical.
        """
        if not isinstance(other, TernaryTensor):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.m == other.m
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


def round_half_away(values: npt.NDArray[np.float32]) -> npt.NDArray[np.float32]:
    """Round to the nearest integer with ties away from zero.

    numpy's rint rounds ties to even; fixing one tie rule keeps blobs identical across
    platforms. The half is added in float64 so values just below 0.5 stay below it.

    Args:
        values: The values to round.

    Returns:
        The rounded values, same dtype.
    """
    rounded = np.floor(np.abs(values).astype(np.float64) + 0.5)
    return np.copysign(rounded, values).astype(values.dtype)


def quantize3(t: DenseTensor, cfg: QuantConfig) -> TernaryTensor:
    """Quantize a tensor to three values.

    Args:
        t: The tensor to quantize.
        cfg: The quantization configuration.

    Raises:
        NonFiniteError: If m = max(|t|) * s overflows the 32-bit float range.

    Returns:
        m = max(|t|) * s and round(t / m); all zeros with m = 0 for an all-zero tensor.
    """
    magnitude = np.float32(np.max(np.abs(t.data))) if t.size else np.float32(0)
    if magnitude == 0:
        return TernaryTensor(dims=t.dims, values=np.zeros(t.size, dtype=np.int8), m=0.0)
    # The float64 product of two float32 values is exact, so one rounding remains.
    with np.errstate(over="ignore"):
        m = np.float32(np.float64(magnitude) * np.float64(np.float32(cfg.s)))
    if not np.isfinite(m):
        logger.error("Magnitude overflow, max |t| = %s, s = %s", magnitude, cfg.s)
        raise NonFiniteError(f"Magnitude max(|t|) * s overflows float32 for s = {cfg.s}")
    scaled = t.data / m
    values = np.clip(round_half_away(scaled), -1, 1).astype(np.int8)
    return TernaryTensor(dims=t.dims, values=values, m=float(m))


def dequantize3(q: TernaryTensor) -> DenseTensor:
    """Expand a ternary tensor back to real values.

    Args:
        q: The ternary tensor.

    Returns:
        The elementwise product m * values.
    """
    return DenseTensor(dims=q.dims, data=np.float32(q.m) * q.values.astype(np.float32))


def zero_count(q: TernaryTensor) -> int:
    """Count the zero entries of a ternary tensor.

    Args:
        q: The ternary tensor.

    Returns:
        The number of zeros.
    """
    return int(q.size - np.count_nonzero(q.values))


class ErrorContext:
    """Per-tensor compression state: the error accumulation buffer and codec settings.

    One context serves exactly one tensor stream. It is not thread safe; distinct contexts
    are independent.

    Attributes:
        dims: The shape of the served tensor stream, fixed for the context lifetime.
        buffer: The accumulated residual not yet transmitted.
        config: The quantization configuration.
        rng: The generator owned by the context, for stochastic codecs.
    """

    def __init__(
        self,
        dims: Sequence[int],
        config: QuantConfig | None = None,
        rng: np.random.Generator | None = None,
    ):
        """Initialize the context with a zero buffer.

        Args:
            dims: The shape of the served tensor stream.
            config: The quantization configuration, s = 1 when omitted.
            rng: The generator for stochastic codecs.
        """
        self.dims: tuple[int, ...] = tuple(int(dim) for dim in dims)
        self.buffer = DenseTensor.zeros(self.dims)
        self.config = config if config is not None else QuantConfig()
        self.rng = rng

    def check_shape(self, t: DenseTensor) -> None:
        """Ensure a tensor belongs to this context's stream.

        Args:
            t: The incoming tensor.

        Raises:
            ShapeError: If the shapes differ.
        """
        if t.dims != self.dims:
            raise ShapeError(f"Tensor dims {t.dims} do not match context dims {self.dims}")

    def accumulate(self, t: DenseTensor) -> npt.NDArray[np.float32]:
        """Add a tensor to the buffer without storing the sum.

        Args:
            t: The incoming tensor.

        Returns:
            The float32 sum of buffer and input.
        """
        self.check_shape(t)
        return self.buffer.data + t.data

    def copy(self) -> Self:
        """Create an independent copy of the context.

        Returns:
            The copy, with a copied generator state.
        """
        clone = type(self)(self.dims, self.config)
        clone.buffer = self.buffer
        if self.rng is not None:
            clone.rng = copy.deepcopy(self.rng)
        return clone

    def reset(self) -> None:
        """Zero the buffer."""
        self.buffer = DenseTensor.zeros(self.dims)


def context_compress(ctx: ErrorContext, t: DenseTensor) -> TernaryTensor:
    """Quantize the accumulated input and keep the residual.

    Args:
        ctx: The context of the tensor stream, updated in place.
        t: The incoming tensor.

    Returns:
        The quantized sum of buffer and input.
    """
    accumulated = DenseTensor(dims=ctx.dims, data=ctx.accumulate(t))
    q = quantize3(accumulated, ctx.config)
    ctx.buffer = DenseTensor(
        dims=ctx.dims, data=accumulated.data - dequantize3(q).data
    )
    return q
