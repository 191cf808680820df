# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Dense 32-bit tensors and the TSR1 raw tensor file format."""

import dataclasses
import logging
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np
import numpy.typing as npt
from typing_extensions import Self

from elkc.errors import FormatError, IoError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b"TSR1"
DTYPE_FLOAT32 = 0
# magic, dtype, rank, reserved
_HEADER_PREFIX = struct.Struct("<4sBBH")
_DIM = struct.Struct("<Q")
MAX_RANK = 255


@dataclasses.dataclass(frozen=True, eq=False)
class DenseTensor:
    """An immutable shaped array of 32-bit real values.

    Attributes:
        dims: The shape. An empty shape is a scalar holding one value.
        data: The row-major flattened values, read-only.
    """

    dims: tuple[int, ...]
    data: npt.NDArray[np.float32]

    def __post_init__(self) -> None:
        """Validate and freeze the tensor contents.

        Raises:
            ShapeError: If a dimension is not positive or the data length mismatches.
            NonFiniteError: If any value is NaN or infinite.
        """
        dims = tuple(int(dim) for dim in self.dims)
        if any(dim < 1 for dim in dims):
            raise ShapeError(f"Dimensions must be positive, got {dims}")
        data = np.array(self.data, dtype=np.float32, copy=True).reshape(-1)
        if data.size != math.prod(dims):
            raise ShapeError(f"Data length {data.size} does not match dimensions {dims}")
        if not np.isfinite(data).all():
            raise NonFiniteError("Tensor contains NaN or infinite values")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array: npt.ArrayLike) -> Self:
        """Build a tensor taking the shape from an array.

        Args:
            array: Any array-like of real values.

        Returns:
            The tensor with the array's shape and values.
        """
        values = np.asarray(array, dtype=np.float32)
        return cls(dims=tuple(values.shape), data=values)

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> Self:
        """Build an all-zero tensor.

        Args:
            dims: The tensor shape.

        Returns:
            The zero tensor.
        """
        return cls(dims=tuple(dims), data=np.zeros(math.prod(dims), dtype=np.float32))

    @property
    def size(self) -> int:
        """The number of elements."""
        return int(self.data.size)

    def array(self) -> npt.NDArray[np.float32]:
        """Get a read-only view of the values in their shape.

        Returns:
            The shaped values.
        """
        return self.data.reshape(self.dims)

    def __eq__(self, other: object) -> bool:
        """Compare shapes and bit patterns.

        Args:
            other: The object to compare with.

        Returns:
            Whether both tensors hold identical bits in identical shapes.
        """
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.dims == other.dims and self.data.tobytes() == other.data.tobytes()

    __hash__ = None  # type: ignore[assignment]


def encode_header(dims: Sequence[int]) -> bytes:
    """Encode the TSR1 file header.

    Args:
        dims: The tensor shape.

    Raises:
        FormatError: If the shape cannot be represented by the format.

    Returns:
        The header bytes.
    """
    if not 1 <= len(dims) <= MAX_RANK:
        raise FormatError(f"Rank must be within 1..{MAX_RANK}, got {len(dims)}")
    if any(dim < 1 for dim in dims):
        raise FormatError(f"Dimensions must be positive, got {tuple(dims)}")
    prefix = _HEADER_PREFIX.pack(TENSOR_MAGIC, DTYPE_FLOAT32, len(dims), 0)
    return prefix + b"".join(_DIM.pack(dim) for dim in dims)


def decode_header(buffer: bytes) -> tuple[tuple[int, ...], int]:
    """Decode the TSR1 file header.

    Args:
        buffer: The file contents.

    Raises:
        FormatError: If the header is truncated or inconsistent.

    Returns:
        The shape and the offset where the payload starts.
    """
    if len(buffer) < _HEADER_PREFIX.size:
        raise FormatError("Truncated tensor header")
    magic, dtype, rank, _ = _HEADER_PREFIX.unpack_from(buffer)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"Bad tensor magic {magic!r}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"Unsupported tensor dtype {dtype}")
    if rank < 1:
        raise FormatError("Tensor rank must be at least 1")
    offset = _HEADER_PREFIX.size
    if len(buffer) < offset + rank * _DIM.size:
        raise FormatError("Truncated tensor dimensions")
    dims = tuple(_DIM.unpack_from(buffer, offset + i * _DIM.size)[0] for i in range(rank))
    if any(dim < 1 for dim in dims):
        raise FormatError(f"Dimensions must be positive, got {dims}")
    return dims, offset + rank * _DIM.size


def tensor_to_bytes(tensor: DenseTensor) -> bytes:
    """Serialize a tensor into the TSR1 format.

    Args:
        tensor: The tensor to serialize.

    Returns:
        The file contents.
    """
    return encode_header(tensor.dims) + tensor.data.astype("<f4", copy=False).tobytes()


def tensor_from_bytes(buffer: bytes) -> DenseTensor:
    """Parse a tensor from the TSR1 format.

    Args:
        buffer: The file contents.

    Raises:
        FormatError: If the header is malformed or the payload length mismatches.

    Returns:
        The parsed tensor.
    """
    dims, offset = decode_header(buffer)
    expected = 4 * math.prod(dims)
    if len(buffer) - offset != expected:
        raise FormatError(
            f"Payload holds {len(buffer) - offset} bytes, dimensions {dims} need {expected}"
        )
    values = np.frombuffer(buffer, dtype="<f4", offset=offset)
    return DenseTensor(dims=dims, data=values)


def read_tensor(path: Path) -> DenseTensor:
    """Read a TSR1 tensor file.

    Args:
        path: The file to read.

    Raises:
        IoError: If the file could not be read.

    Returns:
        The stored tensor.
    """
    try:
        buffer = Path(path).read_bytes()
    except OSError as exc:
        logger.exception("Failed to read tensor file %s.", path)
        raise IoError(f"Failed to read tensor file {path}") from exc
    tensor = tensor_from_bytes(buffer)
    logger.info("Read tensor %s with dims %s.", path, tensor.dims)
    return tensor


def write_tensor(tensor: DenseTensor, path: Path) -> None:
    """Write a TSR1 tensor file.

    Args:
        tensor: The tensor to store.
        path: The destination file.

    Raises:
        IoError: If the file could not be written.
    """
    buffer = tensor_to_bytes(tensor)
    try:
        Path(path).write_bytes(buffer)
    except OSError as exc:
        logger.exception("Failed to write tensor file %s.", path)
        raise IoError(f"Failed to write tensor file {path}") from exc
    logger.info("Wrote tensor %s with dims %s (%s bytes).", path, tensor.dims, len(buffer))
