# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Lossless byte encodings of ternary values: quartic encoding and zero-run encoding.

Quartic encoding packs five ternary digits into one byte (1.6 bits per value). The
flattened, padded digit array is split into five contiguous partitions p0..p4 and byte j
is p0[j]*81 + p1[j]*27 + p2[j]*9 + p3[j]*3 + p4[j]. A byte therefore combines five
elements that lie L/5 apart in the source, not five neighbours: byte value 121 means five
strided elements are all zero.

Zero-run encoding replaces k consecutive 121 bytes (2 <= k <= 14) with the single byte
243 + (k - 2). Longer runs are chunked greedily into codes of 14.
"""

import dataclasses
import logging
import math

import numpy as np
import numpy.typing as npt

from elkc.errors import FormatError, InvalidSymbolError

logger = logging.getLogger(__name__)

GROUP_SIZE = 5
QUARTIC_WEIGHTS = np.array([81, 27, 9, 3, 1], dtype=np.uint16)
MAX_QUARTIC = 242
ZERO_GROUP = 121
RUN_BASE = 243
MIN_RUN = 2
MAX_RUN = 14
MAX_RUN_CODE = RUN_BASE + MAX_RUN - MIN_RUN


@dataclasses.dataclass(frozen=True)
class QuarticBytes:
    """Quartic-encoded ternary values.

    Attributes:
        data: The encoded bytes, each within [0, 242].
        original_len: The number of encoded ternary values.
    """

    data: bytes
    original_len: int


@dataclasses.dataclass(frozen=True)
class ZreBytes:
    """A zero-run encoded byte stream.

    Attributes:
        data: The encoded bytes; 243..255 are run codes.
        decoded_len: The byte count before zero-run encoding.
    """

    data: bytes
    decoded_len: int


def quartic_len(original_len: int) -> int:
    """Get the quartic-encoded size of a ternary sequence.

    Args:
        original_len: The number of ternary values.

    Returns:
        The number of bytes, ceil(original_len / 5).
    """
    return -(-original_len // GROUP_SIZE)


def quartic_overhead() -> float:
    """Get the relative space overhead of 1.6 bits per value over log2(3).

    Returns:
        The overhead ratio, about 0.0095.
    """
    return (8 / GROUP_SIZE) / math.log2(3) - 1


def quartic_encode(values: npt.ArrayLike) -> QuarticBytes:
    """Pack ternary values five to a byte.

    Args:
        values: Values in {-1, 0, 1}, any shape; flattened row-major.

    Raises:
        InvalidSymbolError: If a value is outside {-1, 0, 1}.

    Returns:
        The quartic bytes.
    """
    flat = np.asarray(values).reshape(-1)
    if flat.size and not np.isin(flat, (-1, 0, 1)).all():
        raise InvalidSymbolError("Quartic encoding accepts only -1, 0 and 1")
    padded = np.zeros(quartic_len(flat.size) * GROUP_SIZE, dtype=np.uint16)
    padded[: flat.size] = flat.astype(np.int16) + 1
    partitions = padded.reshape(GROUP_SIZE, -1)
    encoded = QUARTIC_WEIGHTS @ partitions
    return QuarticBytes(data=encoded.astype(np.uint8).tobytes(), original_len=int(flat.size))


def quartic_decode(encoded: QuarticBytes) -> npt.NDArray[np.int8]:
    """Unpack quartic bytes into ternary values.

    Args:
        encoded: The quartic bytes.

    Raises:
        FormatError: If a byte exceeds 242 or the length disagrees with original_len.

    Returns:
        The flat ternary values, original_len long.
    """
    packed = np.frombuffer(encoded.data, dtype=np.uint8)
    if encoded.original_len < 0 or packed.size != quartic_len(encoded.original_len):
        raise FormatError(
            f"{packed.size} quartic bytes cannot hold {encoded.original_len} values"
        )
    if packed.size and packed.max() > MAX_QUARTIC:
        raise FormatError(f"Quartic byte {int(packed.max())} exceeds {MAX_QUARTIC}")
    digits = (packed[np.newaxis, :] // QUARTIC_WEIGHTS[:, np.newaxis]) % 3
    flat = digits.reshape(-1)[: encoded.original_len]
    return flat.astype(np.int8) - 1


def _encode_run(length: int) -> bytes:
    """Encode a run of 121 bytes.

    Args:
        length: The run length, at least 1.

    Returns:
        The greedy run codes; a trailing single 121 stays literal.
    """
    full, rest = divmod(length, MAX_RUN)
    codes = [MAX_RUN_CODE] * full
    if rest >= MIN_RUN:
        codes.append(RUN_BASE + rest - MIN_RUN)
    elif rest == 1:
        codes.append(ZERO_GROUP)
    return bytes(codes)


def zre_encode(data: bytes | bytearray | memoryview | npt.ArrayLike) -> ZreBytes:
    """Collapse runs of 121 bytes into run codes.

    Args:
        data: Bytes with values at most 242.

    Raises:
        InvalidSymbolError: If a byte exceeds 242.

    Returns:
        The zero-run encoded stream.
    """
    if isinstance(data, (bytes, bytearray, memoryview)):
        raw = np.frombuffer(data, dtype=np.uint8)
    else:
        raw = np.asarray(data)
    if raw.size and (raw.min() < 0 or raw.max() > MAX_QUARTIC):
        raise InvalidSymbolError(f"Zero-run encoding accepts bytes up to {MAX_QUARTIC}")
    raw = raw.astype(np.uint8, copy=False)
    is_zero = np.concatenate(([False], raw == ZERO_GROUP, [False]))
    edges = np.flatnonzero(np.diff(is_zero.astype(np.int8)))
    out = bytearray()
    cursor = 0
    for start, end in zip(edges[0::2], edges[1::2]):
        out += raw[cursor:start].tobytes()
        out += _encode_run(int(end - start))
        cursor = int(end)
    out += raw[cursor:].tobytes()
    return ZreBytes(data=bytes(out), decoded_len=int(raw.size))


def zre_decode(encoded: ZreBytes) -> bytes:
    """Expand run codes back into runs of 121 bytes.

    Args:
        encoded: The zero-run encoded stream.

    Raises:
        FormatError: If the expanded length differs from decoded_len.

    Returns:
        The original byte stream.
    """
    packed = np.frombuffer(encoded.data, dtype=np.uint8)
    is_run = packed >= RUN_BASE
    lengths = np.where(is_run, packed.astype(np.int64) - RUN_BASE + MIN_RUN, 1)
    decoded = np.repeat(np.where(is_run, ZERO_GROUP, packed).astype(np.uint8), lengths)
    if decoded.size != encoded.decoded_len:
        raise FormatError(
            f"Zero-run stream expands to {decoded.size} bytes, expected {encoded.decoded_len}"
        )
    return decoded.tobytes()
