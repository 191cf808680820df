# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Comparison codecs sharing the error context and blob container with 3LC.

Each codec is a primitive operation over DenseTensor plus a payload packer. The blob
module wraps the payloads into the common container and picks the codec per CodecKind.
"""

import dataclasses
import logging
import math
import struct
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from elkc.errors import ConfigError, FormatError
from elkc.quant3 import ErrorContext, QuantConfig, TernaryTensor, round_half_away
from elkc.tensor import DenseTensor

logger = logging.getLogger(__name__)

INT8_LIMIT = 127
_SCALE = struct.Struct("<f")
_MQE_SCALES = struct.Struct("<ff")


class CodecName(str, Enum):
    """Names of the available codecs, as written in codec specifiers.

    Attributes:
        FLOAT32: Lossless 32-bit float passthrough.
        THREE_LC: 3-value quantization with sparsity multiplication, quartic and zero-run
            encoding.
        INT8: Symmetric 8-bit integer quantization.
        STOCH3: Stochastic 3-value quantization with quartic encoding.
        MQE1: 1-bit quantization with per-sign mean reconstruction and error feedback.
        TOPK: Sparsification of the largest state changes with error feedback.
        LOCAL_STEPS: Full precision transmission every n local steps.
    """

    FLOAT32 = "float32"
    THREE_LC = "3lc"
    INT8 = "int8"
    STOCH3 = "stoch3"
    MQE1 = "mqe1"
    TOPK = "topk"
    LOCAL_STEPS = "local-steps"


_NO_ZRE = "no-zre"


@dataclasses.dataclass(frozen=True)
class CodecKind:
    """A codec and its parameters.

    Attributes:
        name: The codec.
        s: The sparsity multiplier of 3LC.
        use_zre: Whether 3LC applies zero-run encoding.
        fraction: The share of entries top-k transmits, within (0, 1].
        local_steps: The transmission period of local steps, at least 1.
    """

    name: CodecName
    s: float = 1.0
    use_zre: bool = True
    fraction: float = 1.0
    local_steps: int = 1

    def __post_init__(self) -> None:
        """Validate the codec parameters.

        Raises:
            ConfigError: If a parameter is out of range.
        """
        QuantConfig(s=self.s)
        if not 0 < self.fraction <= 1:
            raise ConfigError(f"Top-k fraction must be within (0, 1], got {self.fraction}")
        if self.local_steps < 1:
            raise ConfigError(f"Local steps must be at least 1, got {self.local_steps}")

    @property
    def quant_config(self) -> QuantConfig:
        """The 3-value quantization configuration."""
        return QuantConfig(s=self.s)

    @property
    def lossless(self) -> bool:
        """Whether the codec transmits values at full precision."""
        return self.name in (CodecName.FLOAT32, CodecName.LOCAL_STEPS)

    @classmethod
    def from_str(cls, spec: str) -> "CodecKind":
        """Parse a codec specifier.

        Accepted forms are float32, 3lc[:s][:no-zre], int8, stoch3, mqe1, topk:fraction and
        local-steps:n.

        Args:
            spec: The codec specifier, case insensitive.

        Raises:
            ConfigError: If the specifier is malformed.

        Returns:
            The codec kind.
        """
        head, *args = [part.strip() for part in spec.strip().lower().split(":")]
        try:
            name = CodecName(head)
        except ValueError as exc:
            raise ConfigError(f"Unknown codec: {spec}") from exc
        try:
            match name:
                case CodecName.THREE_LC:
                    use_zre = _NO_ZRE not in args
                    numbers = [arg for arg in args if arg != _NO_ZRE]
                    if len(numbers) > 1:
                        raise ConfigError(f"Too many 3lc arguments: {spec}")
                    s = float(numbers[0]) if numbers else 1.0
                    return cls(name=name, s=s, use_zre=use_zre)
                case CodecName.TOPK:
                    (fraction,) = args
                    return cls(name=name, fraction=float(fraction))
                case CodecName.LOCAL_STEPS:
                    (steps,) = args
                    return cls(name=name, local_steps=int(steps))
                case _:
                    if args:
                        raise ConfigError(f"Codec {name.value} takes no arguments: {spec}")
                    return cls(name=name)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Invalid codec arguments: {spec}") from exc

    def __str__(self) -> str:
        """Format the kind as a codec specifier.

        Returns:
            The specifier, parseable by from_str.
        """
        match self.name:
            case CodecName.THREE_LC:
                suffix = "" if self.use_zre else f":{_NO_ZRE}"
                return f"{self.name.value}:{self.s:g}{suffix}"
            case CodecName.TOPK:
                return f"{self.name.value}:{self.fraction:g}"
            case CodecName.LOCAL_STEPS:
                return f"{self.name.value}:{self.local_steps}"
            case _:
                return self.name.value


class Int8Code(NamedTuple):
    """Symmetric 8-bit quantization output.

    Attributes:
        scale: The value one code step stands for.
        codes: The codes within [-127, 127].
    """

    scale: float
    codes: npt.NDArray[np.int8]


class MqeCode(NamedTuple):
    """1-bit quantization output.

    Attributes:
        m_neg: The reconstruction of a cleared bit, the mean of negative entries.
        m_pos: The reconstruction of a set bit, the mean of non-negative entries.
        bits: True where the input was non-negative.
    """

    m_neg: float
    m_pos: float
    bits: npt.NDArray[np.bool_]


class TopKCode(NamedTuple):
    """Sparsification output.

    Attributes:
        bitmap: True at transmitted positions.
        values: The transmitted values in position order.
    """

    bitmap: npt.NDArray[np.bool_]
    values: npt.NDArray[np.float32]


def quantize8(t: DenseTensor) -> Int8Code:
    """Quantize a tensor to 255 symmetric integer levels.

    Args:
        t: The tensor to quantize.

    Returns:
        scale = max(|t|) / 127 and round(t / scale); zero scale and codes for a zero tensor.
    """
    magnitude = np.float32(np.max(np.abs(t.data)))
    if magnitude == 0:
        return Int8Code(scale=0.0, codes=np.zeros(t.size, dtype=np.int8))
    scale = np.float32(magnitude / np.float32(INT8_LIMIT))
    codes = np.clip(round_half_away(t.data / scale), -INT8_LIMIT, INT8_LIMIT)
    return Int8Code(scale=float(scale), codes=codes.astype(np.int8))


def dequantize8(code: Int8Code, dims: Sequence[int]) -> DenseTensor:
    """Expand 8-bit codes.

    Args:
        code: The quantized values.
        dims: The tensor shape.

    Returns:
        scale * codes.
    """
    with np.errstate(over="ignore"):
        data = np.float32(code.scale) * code.codes.astype(np.float32)
    return DenseTensor(dims=tuple(dims), data=data)


def stoch_quantize3(t: DenseTensor, rng: np.random.Generator) -> TernaryTensor:
    """Quantize to three values with probabilities that keep the expectation unbiased.

    Each element x becomes sign(x) with probability |x| / m, otherwise 0, for m = max(|t|).

    Args:
        t: The tensor to quantize.
        rng: The generator drawing one uniform value per element.

    Returns:
        The ternary tensor with magnitude m.
    """
    m = np.float32(np.max(np.abs(t.data)))
    if m == 0:
        return TernaryTensor(dims=t.dims, values=np.zeros(t.size, dtype=np.int8), m=0.0)
    probabilities = np.abs(t.data).astype(np.float64) / np.float64(m)
    fire = rng.random(t.size) < probabilities
    values = np.where(fire, np.sign(t.data), 0).astype(np.int8)
    return TernaryTensor(dims=t.dims, values=values, m=float(m))


def mqe_quantize1(ctx: ErrorContext, t: DenseTensor) -> MqeCode:
    """Quantize the accumulated input to one bit per entry and keep the residual.

    Zero entries count as non-negative.

    Args:
        ctx: The context of the tensor stream, updated in place.
        t: The incoming tensor.

    Returns:
        The per-sign means and the sign bitmap.
    """
    u = ctx.accumulate(t)
    bits = u >= 0
    m_pos = np.float32(u[bits].mean()) if bits.any() else np.float32(0)
    m_neg = np.float32(u[~bits].mean()) if not bits.all() else np.float32(0)
    code = MqeCode(m_neg=float(m_neg), m_pos=float(m_pos), bits=bits)
    ctx.buffer = DenseTensor(dims=ctx.dims, data=u - mqe_dequantize(code, ctx.dims).data)
    return code


def mqe_dequantize(code: MqeCode, dims: Sequence[int]) -> DenseTensor:
    """Expand 1-bit codes.

    Args:
        code: The quantized values.
        dims: The tensor shape.

    Returns:
        m_pos where the bit is set, m_neg elsewhere.
    """
    data = np.where(code.bits, np.float32(code.m_pos), np.float32(code.m_neg))
    return DenseTensor(dims=tuple(dims), data=data)


def topk_count(fraction: float, size: int) -> int:
    """Get the number of entries top-k transmits.

    Args:
        fraction: The share of entries, within (0, 1].
        size: The element count.

    Returns:
        ceil(fraction * size), at least 1.
    """
    # rounding keeps 0.07 * 100 at 7
    return max(1, math.ceil(round(fraction * size, 9)))


def topk_sparsify(ctx: ErrorContext, t: DenseTensor, fraction: float) -> TopKCode:
    """Select the largest accumulated entries and keep the rest in the buffer.

    Ties on magnitude go to the lower index.

    Args:
        ctx: The context of the tensor stream, updated in place.
        t: The incoming tensor.
        fraction: The share of entries to transmit, within (0, 1].

    Raises:
        ConfigError: If fraction is out of range.

    Returns:
        The selection bitmap and the selected values.
    """
    if not 0 < fraction <= 1:
        raise ConfigError(f"Top-k fraction must be within (0, 1], got {fraction}")
    u = ctx.accumulate(t)
    k = topk_count(fraction, u.size)
    order = np.argsort(-np.abs(u), kind="stable")
    bitmap = np.zeros(u.size, dtype=bool)
    bitmap[order[:k]] = True
    ctx.buffer = DenseTensor(dims=ctx.dims, data=np.where(bitmap, np.float32(0), u))
    return TopKCode(bitmap=bitmap, values=u[bitmap])


def topk_densify(code: TopKCode, dims: Sequence[int]) -> DenseTensor:
    """Scatter transmitted values into a zero tensor.

    Args:
        code: The sparsified values.
        dims: The tensor shape.

    Returns:
        The dense tensor.
    """
    data = np.zeros(code.bitmap.size, dtype=np.float32)
    data[code.bitmap] = code.values
    return DenseTensor(dims=tuple(dims), data=data)


def local_step_gate(
    ctx: ErrorContext, t: DenseTensor, step: int, n: int
) -> DenseTensor | None:
    """Accumulate locally and release the sum on the last step of every period.

    Args:
        ctx: The context of the tensor stream, updated in place.
        t: The incoming tensor.
        step: The zero-based step counter.
        n: The period, at least 1.

    Raises:
        ConfigError: If n is not positive.

    Returns:
        The accumulated sum when step mod n == n - 1, otherwise None.
    """
    if n < 1:
        raise ConfigError(f"Local steps must be at least 1, got {n}")
    ctx.buffer = DenseTensor(dims=ctx.dims, data=ctx.accumulate(t))
    if step % n != n - 1:
        return None
    emitted = ctx.buffer
    ctx.reset()
    return emitted


def bitmap_len(size: int) -> int:
    """Get the byte length of a bitmap.

    Args:
        size: The number of bits.

    Returns:
        ceil(size / 8).
    """
    return -(-size // 8)


def _pack_bits(bits: npt.NDArray[np.bool_]) -> bytes:
    """Pack a boolean array, first element in the lowest bit.

    Args:
        bits: The bits.

    Returns:
        The bitmap bytes.
    """
    return np.packbits(bits, bitorder="little").tobytes()


def _unpack_bits(buffer: bytes, size: int) -> npt.NDArray[np.bool_]:
    """Unpack a bitmap.

    Args:
        buffer: The bitmap bytes, exactly ceil(size / 8) long.
        size: The number of bits.

    Raises:
        FormatError: If padding bits are set.

    Returns:
        The bits.
    """
    packed = np.frombuffer(buffer, dtype=np.uint8)
    bits = np.unpackbits(packed, bitorder="little")
    if bits[size:].any():
        raise FormatError("Bitmap padding bits must be zero")
    return bits[:size].astype(bool)


def _check_len(payload: bytes, expected: int, codec: str) -> None:
    """Ensure a payload has its layout's length.

    Args:
        payload: The payload.
        expected: The expected byte length.
        codec: The codec name for the error message.

    Raises:
        FormatError: If the lengths differ.
    """
    if len(payload) != expected:
        raise FormatError(f"{codec} payload holds {len(payload)} bytes, expected {expected}")


def pack_float32(t: DenseTensor) -> bytes:
    """Serialize raw values.

    Args:
        t: The tensor.

    Returns:
        The little-endian 32-bit values.
    """
    return t.data.astype("<f4", copy=False).tobytes()


def unpack_float32(payload: bytes, size: int) -> npt.NDArray[np.float32]:
    """Parse raw values.

    Args:
        payload: The payload.
        size: The element count.

    Returns:
        The values.
    """
    _check_len(payload, 4 * size, CodecName.FLOAT32.value)
    return np.frombuffer(payload, dtype="<f4").astype(np.float32)


def pack_int8(code: Int8Code) -> bytes:
    """Serialize 8-bit codes as the scale followed by one byte per code.

    Args:
        code: The quantized values.

    Returns:
        The payload.
    """
    return _SCALE.pack(code.scale) + code.codes.astype(np.int8).tobytes()


def unpack_int8(payload: bytes, size: int) -> Int8Code:
    """Parse 8-bit codes.

    Args:
        payload: The payload.
        size: The element count.

    Raises:
        FormatError: If the layout is violated or -128 occurs.

    Returns:
        The quantized values.
    """
    _check_len(payload, _SCALE.size + size, CodecName.INT8.value)
    (scale,) = _SCALE.unpack_from(payload)
    codes = np.frombuffer(payload, dtype=np.int8, offset=_SCALE.size)
    if codes.size and codes.min() < -INT8_LIMIT:
        raise FormatError("8-bit code -128 is unused")
    if not math.isfinite(scale) or scale < 0:
        raise FormatError(f"Invalid 8-bit scale {scale}")
    return Int8Code(scale=scale, codes=codes.copy())


def pack_mqe(code: MqeCode) -> bytes:
    """Serialize 1-bit codes as both means followed by the sign bitmap.

    Args:
        code: The quantized values.

    Returns:
        The payload.
    """
    return _MQE_SCALES.pack(code.m_neg, code.m_pos) + _pack_bits(code.bits)


def unpack_mqe(payload: bytes, size: int) -> MqeCode:
    """Parse 1-bit codes.

    Args:
        payload: The payload.
        size: The element count.

    Raises:
        FormatError: If the layout is violated.

    Returns:
        The quantized values.
    """
    _check_len(payload, _MQE_SCALES.size + bitmap_len(size), CodecName.MQE1.value)
    m_neg, m_pos = _MQE_SCALES.unpack_from(payload)
    if not (math.isfinite(m_neg) and math.isfinite(m_pos)):
        raise FormatError("1-bit means must be finite")
    bits = _unpack_bits(payload[_MQE_SCALES.size :], size)
    return MqeCode(m_neg=m_neg, m_pos=m_pos, bits=bits)


def pack_topk(code: TopKCode) -> bytes:
    """Serialize a sparsification as the bitmap followed by the selected values.

    Args:
        code: The sparsified values.

    Returns:
        The payload.
    """
    return _pack_bits(code.bitmap) + code.values.astype("<f4", copy=False).tobytes()


def unpack_topk(payload: bytes, size: int) -> TopKCode:
    """Parse a sparsification.

    Args:
        payload: The payload.
        size: The element count.

    Raises:
        FormatError: If the layout is violated.

    Returns:
        The sparsified values.
    """
    map_len = bitmap_len(size)
    if len(payload) < map_len:
        raise FormatError(f"Top-k payload of {len(payload)} bytes misses its bitmap")
    bitmap = _unpack_bits(payload[:map_len], size)
    _check_len(payload, map_len + 4 * int(bitmap.sum()), CodecName.TOPK.value)
    values = np.frombuffer(payload, dtype="<f4", offset=map_len).astype(np.float32)
    return TopKCode(bitmap=bitmap, values=values)
