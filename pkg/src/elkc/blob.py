# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""The 3LC1 compressed tensor container and the compression pipelines writing it.

Layout, all little-endian:

    magic "3LC1" | version u8 | codec_id u8 | flags u8 | rank u8 | dims u64 * rank |
    m f32 | payload_len u64 | payload

Flag bit 0 marks a zero-run encoded payload. The header m is the ternary magnitude for
codec ids 0 and 2 and zero for codecs that carry their scales inside the payload.
"""

import dataclasses
import logging
import math
import struct
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np
from typing_extensions import Self

from elkc import baselines, encode
from elkc.baselines import CodecKind, CodecName
from elkc.errors import ConfigError, FormatError, IoError, NonFiniteError
from elkc.quant3 import ErrorContext, TernaryTensor, context_compress, dequantize3
from elkc.tensor import DenseTensor
from elkc.utils import RngStream, named_rng

logger = logging.getLogger(__name__)

BLOB_MAGIC = b"3LC1"
BLOB_VERSION = 1
FLAG_ZRE = 0x01
MAX_RANK = 255
# magic, version, codec_id, flags, rank
_HEADER_PREFIX = struct.Struct("<4sBBBB")
_DIM = struct.Struct("<Q")
# m, payload_len
_HEADER_SUFFIX = struct.Struct("<fQ")


class CodecId(IntEnum):
    """Codec identifiers stored in the container header.

    Attributes:
        THREE_LC: 3-value quantization with quartic and optional zero-run encoding.
        INT8: Scale and 8-bit codes.
        STOCH3: Stochastic 3-value quantization with quartic encoding.
        MQE1: Two means and a sign bitmap.
        TOPK: Selection bitmap and selected values.
        FLOAT32: Raw 32-bit values.
    """

    THREE_LC = 0
    INT8 = 1
    STOCH3 = 2
    MQE1 = 3
    TOPK = 4
    FLOAT32 = 5


TERNARY_CODECS = frozenset((CodecId.THREE_LC, CodecId.STOCH3))


@dataclasses.dataclass(frozen=True)
class CompressedBlob:
    """A self-describing compressed tensor.

    Attributes:
        codec_id: The codec that produced the payload.
        dims: The shape of the compressed tensor.
        m: The ternary magnitude, zero for codecs with in-payload scales.
        payload: The encoded tensor.
        flags: Bit 0 set when the payload is zero-run encoded.
        version: The container version.
    """

    codec_id: CodecId
    dims: tuple[int, ...]
    m: float
    payload: bytes
    flags: int = 0
    version: int = BLOB_VERSION

    def __post_init__(self) -> None:
        """Validate the header fields.

        Raises:
            FormatError: If a header field is invalid.
        """
        try:
            codec_id = CodecId(self.codec_id)
        except ValueError as exc:
            raise FormatError(f"Unknown codec id {self.codec_id}") from exc
        dims = tuple(int(dim) for dim in self.dims)
        if self.version != BLOB_VERSION:
            raise FormatError(f"Unsupported blob version {self.version}")
        if len(dims) > MAX_RANK or any(dim < 1 for dim in dims):
            raise FormatError(f"Invalid blob dimensions {dims}")
        if self.flags & ~FLAG_ZRE:
            raise FormatError(f"Unknown blob flags {self.flags:#04x}")
        if self.flags & FLAG_ZRE and codec_id is not CodecId.THREE_LC:
            raise FormatError(f"Codec {codec_id.name} does not use zero-run encoding")
        m = float(np.float32(self.m))
        if not math.isfinite(m) or m < 0:
            raise FormatError(f"Invalid blob magnitude {self.m}")
        object.__setattr__(self, "codec_id", codec_id)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def size(self) -> int:
        """The element count of the compressed tensor."""
        return math.prod(self.dims)

    @property
    def payload_len(self) -> int:
        """The payload byte length."""
        return len(self.payload)

    @property
    def header_len(self) -> int:
        """The header byte length."""
        return _HEADER_PREFIX.size + len(self.dims) * _DIM.size + _HEADER_SUFFIX.size

    @property
    def zre(self) -> bool:
        """Whether the payload is zero-run encoded."""
        return bool(self.flags & FLAG_ZRE)

    def to_bytes(self) -> bytes:
        """Serialize the blob.

        Returns:
            The container bytes.
        """
        prefix = _HEADER_PREFIX.pack(
            BLOB_MAGIC, self.version, self.codec_id, self.flags, len(self.dims)
        )
        dims = b"".join(_DIM.pack(dim) for dim in self.dims)
        return prefix + dims + _HEADER_SUFFIX.pack(self.m, self.payload_len) + self.payload

    @classmethod
    def from_bytes(cls, buffer: bytes) -> Self:
        """Parse a blob.

        Args:
            buffer: The container bytes.

        Raises:
            FormatError: If the header is malformed or the payload length mismatches.

        Returns:
            The parsed blob.
        """
        if len(buffer) < _HEADER_PREFIX.size:
            raise FormatError("Truncated blob header")
        magic, version, codec_id, flags, rank = _HEADER_PREFIX.unpack_from(buffer)
        if magic != BLOB_MAGIC:
            raise FormatError(f"Bad blob magic {magic!r}")
        offset = _HEADER_PREFIX.size
        if len(buffer) < offset + rank * _DIM.size + _HEADER_SUFFIX.size:
            raise FormatError("Truncated blob header")
        dims = tuple(_DIM.unpack_from(buffer, offset + i * _DIM.size)[0] for i in range(rank))
        offset += rank * _DIM.size
        m, payload_len = _HEADER_SUFFIX.unpack_from(buffer, offset)
        offset += _HEADER_SUFFIX.size
        if len(buffer) - offset != payload_len:
            raise FormatError(
                f"Blob declares {payload_len} payload bytes, {len(buffer) - offset} present"
            )
        return cls(
            codec_id=codec_id,
            dims=dims,
            m=m,
            payload=buffer[offset:],
            flags=flags,
            version=version,
        )


def _ternary_blob(codec_id: CodecId, q: TernaryTensor, use_zre: bool) -> CompressedBlob:
    """Encode a ternary tensor into a blob.

    Args:
        codec_id: The producing codec.
        q: The ternary tensor.
        use_zre: Whether to try zero-run encoding.

    Returns:
        The blob; zero-run encoding is kept only when it does not expand the payload.
    """
    payload = encode.quartic_encode(q.values).data
    flags = 0
    if use_zre:
        zre = encode.zre_encode(payload)
        if len(zre.data) <= len(payload):
            payload, flags = zre.data, FLAG_ZRE
    return CompressedBlob(codec_id=codec_id, dims=q.dims, m=q.m, payload=payload, flags=flags)


def _float32_blob(t: DenseTensor) -> CompressedBlob:
    """Wrap raw values into a blob.

    Args:
        t: The tensor.

    Returns:
        The uncompressed blob.
    """
    return CompressedBlob(
        codec_id=CodecId.FLOAT32, dims=t.dims, m=0.0, payload=baselines.pack_float32(t)
    )


def compress(ctx: ErrorContext, t: DenseTensor, use_zre: bool = True) -> CompressedBlob:
    """Compress a tensor with 3LC through its error accumulation context.

    Args:
        ctx: The context of the tensor stream, updated in place.
        t: The incoming tensor.
        use_zre: Whether to apply zero-run encoding.

    Returns:
        The 3LC blob.
    """
    q = context_compress(ctx, t)
    return _ternary_blob(CodecId.THREE_LC, q, use_zre)


def decode_ternary(b: CompressedBlob) -> TernaryTensor:
    """Decode the ternary tensor of a 3LC or stochastic 3-value blob.

    Args:
        b: The blob.

    Raises:
        FormatError: If the blob is not ternary or its payload is inconsistent.

    Returns:
        The ternary tensor with the header magnitude.
    """
    if b.codec_id not in TERNARY_CODECS:
        raise FormatError(f"Codec {b.codec_id.name} does not carry ternary values")
    quartic_len = encode.quartic_len(b.size)
    data = b.payload
    if b.zre:
        data = encode.zre_decode(encode.ZreBytes(data=data, decoded_len=quartic_len))
    values = encode.quartic_decode(encode.QuarticBytes(data=data, original_len=b.size))
    try:
        return TernaryTensor(dims=b.dims, values=values, m=b.m)
    except ValueError as exc:
        raise FormatError(f"Inconsistent ternary blob: {exc}") from exc


def decompress(b: CompressedBlob) -> DenseTensor:
    """Reconstruct the tensor a blob encodes.

    Args:
        b: The blob.

    Raises:
        FormatError: If the payload is inconsistent with the header.

    Returns:
        The decompressed tensor.
    """
    try:
        match b.codec_id:
            case CodecId.THREE_LC | CodecId.STOCH3:
                return dequantize3(decode_ternary(b))
            case CodecId.INT8:
                code = baselines.unpack_int8(b.payload, b.size)
                return baselines.dequantize8(code, b.dims)
            case CodecId.MQE1:
                return baselines.mqe_dequantize(baselines.unpack_mqe(b.payload, b.size), b.dims)
            case CodecId.TOPK:
                return baselines.topk_densify(baselines.unpack_topk(b.payload, b.size), b.dims)
            case _:
                return DenseTensor(dims=b.dims, data=baselines.unpack_float32(b.payload, b.size))
    except NonFiniteError as exc:
        logger.error("Non-finite values decoded from %s blob", b.codec_id.name)
        raise FormatError(f"Blob payload decodes to non-finite values: {exc}") from exc


def blob_ratio(b: CompressedBlob) -> float:
    """Get the payload compression ratio against 32-bit values, headers excluded.

    Args:
        b: The blob.

    Returns:
        4 * element count / payload_len.
    """
    if not b.payload_len:
        return math.inf
    return 4 * b.size / b.payload_len


def new_context(
    kind: CodecKind, dims: Sequence[int], rng: np.random.Generator | None = None
) -> ErrorContext:
    """Create the context a codec kind compresses a tensor stream through.

    Args:
        kind: The codec kind.
        dims: The tensor stream shape.
        rng: The generator of the stochastic codec; a fixed default stream when omitted.

    Returns:
        The fresh context.
    """
    if rng is None and kind.name is CodecName.STOCH3:
        rng = named_rng(0, RngStream.CODEC)
    return ErrorContext(dims, config=kind.quant_config, rng=rng)


def compress_with(
    kind: CodecKind, ctx: ErrorContext, t: DenseTensor, step: int = 0
) -> CompressedBlob | None:
    """Compress a tensor with any codec kind.

    Args:
        kind: The codec kind.
        ctx: The context of the tensor stream, updated in place by codecs with error
            feedback.
        t: The incoming tensor.
        step: The zero-based step counter, used by local steps.

    Raises:
        ConfigError: If the stochastic codec context has no generator.

    Returns:
        The blob, or None when local steps hold the tensor back.
    """
    if kind.name is CodecName.THREE_LC:
        return compress(ctx, t, kind.use_zre)
    ctx.check_shape(t)
    match kind.name:
        case CodecName.INT8:
            code = baselines.quantize8(t)
            return CompressedBlob(
                codec_id=CodecId.INT8, dims=t.dims, m=0.0, payload=baselines.pack_int8(code)
            )
        case CodecName.STOCH3:
            if ctx.rng is None:
                raise ConfigError("The stochastic codec needs a context generator")
            return _ternary_blob(CodecId.STOCH3, baselines.stoch_quantize3(t, ctx.rng), False)
        case CodecName.MQE1:
            mqe = baselines.mqe_quantize1(ctx, t)
            return CompressedBlob(
                codec_id=CodecId.MQE1, dims=t.dims, m=0.0, payload=baselines.pack_mqe(mqe)
            )
        case CodecName.TOPK:
            topk = baselines.topk_sparsify(ctx, t, kind.fraction)
            return CompressedBlob(
                codec_id=CodecId.TOPK, dims=t.dims, m=0.0, payload=baselines.pack_topk(topk)
            )
        case CodecName.LOCAL_STEPS:
            emitted = baselines.local_step_gate(ctx, t, step, kind.local_steps)
            return None if emitted is None else _float32_blob(emitted)
        case _:
            return _float32_blob(t)


def read_blob(path: Path) -> CompressedBlob:
    """Read a 3LC1 file.

    Args:
        path: The file to read.

    Raises:
        IoError: If the file could not be read.

    Returns:
        The stored blob.
    """
    try:
        buffer = Path(path).read_bytes()
    except OSError as exc:
        logger.exception("Failed to read blob file %s.", path)
        raise IoError(f"Failed to read blob file {path}") from exc
    blob = CompressedBlob.from_bytes(buffer)
    logger.info("Read %s blob %s with dims %s.", blob.codec_id.name, path, blob.dims)
    return blob


def write_blob(blob: CompressedBlob, path: Path) -> None:
    """Write a 3LC1 file.

    Args:
        blob: The blob to store.
        path: The destination file.

    Raises:
        IoError: If the file could not be written.
    """
    buffer = blob.to_bytes()
    try:
        Path(path).write_bytes(buffer)
    except OSError as exc:
        logger.exception("Failed to write blob file %s.", path)
        raise IoError(f"Failed to write blob file {path}") from exc
    logger.info("Wrote blob %s (%s payload bytes).", path, blob.payload_len)
