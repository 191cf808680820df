# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Unit tests for tensor module."""

import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from elkc.errors import FormatError, IoError, NonFiniteError, ShapeError
from elkc.tensor import (
    DenseTensor,
    read_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
    write_tensor,
)


@pytest.mark.parametrize(
    "value",
    [
        pytest.param(float("nan"), id="nan"),
        pytest.param(float("inf"), id="inf"),
        pytest.param(float("-inf"), id="negative inf"),
    ],
)
def test_dense_tensor_non_finite(value: float):
    """
    arrange: given a value list containing a non-finite value.
    act: when a DenseTensor is constructed.
    assert: NonFiniteError, a ValueError, is raised.
    """
    with pytest.raises(NonFiniteError):
        DenseTensor(dims=(2,), data=[1.0, value])

    with pytest.raises(ValueError):
        DenseTensor(dims=(2,), data=[value, 1.0])


@pytest.mark.parametrize(
    "dims, data",
    [
        pytest.param((3,), [1.0, 2.0], id="short data"),
        pytest.param((2, 2), [1.0] * 5, id="long data"),
        pytest.param((0,), [], id="zero dim"),
        pytest.param((2, -1), [1.0, 2.0], id="negative dim"),
    ],
)
def test_dense_tensor_invalid_shape(dims: tuple[int, ...], data: list[float]):
    """
    arrange: given dims that do not describe the data.
    act: when a DenseTensor is constructed.
    assert: ShapeError is raised.
    """
    with pytest.raises(ShapeError):
        DenseTensor(dims=dims, data=data)


def test_dense_tensor_is_immutable_copy():
    """
    arrange: given a writable numpy array.
    act: when a DenseTensor is built from it and the array is modified.
    assert: the tensor keeps the original values and its data cannot be written.
    """
    source = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)

    tensor = DenseTensor.from_array(source)
    source[0, 0] = 9.0

    assert tensor.dims == (2, 2)
    assert tensor.data.tolist() == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        tensor.data[0] = 5.0


def test_dense_tensor_equality_is_bit_exact():
    """
    arrange: given tensors holding 0.0 and -0.0.
    act: when they are compared.
    assert: they differ, while identical tensors compare equal.
    """
    positive = DenseTensor(dims=(1,), data=[0.0])
    negative = DenseTensor(dims=(1,), data=[-0.0])

    assert positive != negative
    assert positive == DenseTensor.zeros((1,))
    assert DenseTensor(dims=(2,), data=[1, 2]) != DenseTensor(dims=(1, 2), data=[1, 2])


def test_tensor_to_bytes_layout():
    """
    arrange: given a 2x2 tensor.
    act: when it is serialized.
    assert: the header fields and little-endian payload are laid out in order.
    """
    tensor = DenseTensor(dims=(2, 2), data=[1.0, 0.0, -1.0, 0.5])

    buffer = tensor_to_bytes(tensor)

    assert buffer[:4] == b"TSR1"
    assert buffer[4:8] == bytes([0, 2, 0, 0])
    assert struct.unpack_from("<QQ", buffer, 8) == (2, 2)
    assert struct.unpack_from("<4f", buffer, 24) == (1.0, 0.0, -1.0, 0.5)
    assert len(buffer) == 40


def test_write_tensor_zeros_file_size(tmp_path: Path):
    """
    arrange: given a tensor of three zeros.
    act: when it is written.
    assert: the file holds 28 bytes and reads back unchanged.
    """
    tensor = DenseTensor.zeros((3,))
    path = tmp_path / "zeros.tsr"

    write_tensor(tensor, path)

    assert path.stat().st_size == 28
    assert read_tensor(path) == tensor


def test_read_tensor_minimal(tmp_path: Path):
    """
    arrange: given a hand-written file of one zero value.
    act: when it is read.
    assert: a one element tensor is returned.
    """
    path = tmp_path / "one.tsr"
    path.write_bytes(b"TSR1" + bytes([0, 1, 0, 0]) + struct.pack("<Q", 1) + struct.pack("<f", 0))

    tensor = read_tensor(path)

    assert tensor.dims == (1,)
    assert tensor.data.tolist() == [0.0]


@given(
    array=hnp.arrays(
        dtype=np.float32,
        shape=hnp.array_shapes(min_dims=1, max_dims=4, min_side=1, max_side=6),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=32),
    )
)
def test_tensor_bytes_round_trip(array: np.ndarray):
    """
    arrange: given a random finite array of random rank.
    act: when it is serialized and parsed back.
    assert: the parsed tensor is bit-identical.
    """
    tensor = DenseTensor.from_array(array)

    assert tensor_from_bytes(tensor_to_bytes(tensor)) == tensor


def _header(dims: tuple[int, ...], magic: bytes = b"TSR1", dtype: int = 0) -> bytes:
    """Build a TSR1 header by hand.

    Args:
        dims: The dimensions.
        magic: The magic bytes.
        dtype: The dtype byte.

    Returns:
        The header bytes.
    """
    return struct.pack("<4sBBH", magic, dtype, len(dims), 0) + b"".join(
        struct.pack("<Q", dim) for dim in dims
    )


@pytest.mark.parametrize(
    "buffer",
    [
        pytest.param(b"TSR", id="truncated prefix"),
        pytest.param(_header((1,), magic=b"TSR2") + b"\0" * 4, id="bad magic"),
        pytest.param(_header((1,), dtype=1) + b"\0" * 4, id="bad dtype"),
        pytest.param(_header(()), id="rank zero"),
        pytest.param(_header((2, 2))[:20], id="truncated dims"),
        pytest.param(_header((0,)), id="zero dim"),
        pytest.param(_header((2, 2)) + b"\0" * 12, id="short payload"),
        pytest.param(_header((2,)) + b"\0" * 12, id="trailing bytes"),
    ],
)
def test_tensor_from_bytes_malformed(buffer: bytes):
    """
    arrange: given a malformed TSR1 buffer.
    act: when it is parsed.
    assert: FormatError is raised.
    """
    with pytest.raises(FormatError):
        tensor_from_bytes(buffer)


def test_tensor_from_bytes_non_finite():
    """
    arrange: given a TSR1 buffer holding a NaN.
    act: when it is parsed.
    assert: NonFiniteError is raised.
    """
    with pytest.raises(NonFiniteError):
        tensor_from_bytes(_header((1,)) + struct.pack("<f", float("nan")))


def test_write_tensor_rank_zero(tmp_path: Path):
    """
    arrange: given a scalar tensor with an empty shape.
    act: when it is written.
    assert: FormatError is raised and no file is created.
    """
    path = tmp_path / "scalar.tsr"

    with pytest.raises(FormatError):
        write_tensor(DenseTensor(dims=(), data=[1.0]), path)

    assert not path.exists()


def test_read_tensor_missing_file(tmp_path: Path):
    """
    arrange: given a path without a file.
    act: when read_tensor is called.
    assert: IoError is raised.
    """
    with pytest.raises(IoError):
        read_tensor(tmp_path / "missing.tsr")


def test_write_tensor_unwritable(tmp_path: Path):
    """
    arrange: given a destination that is a directory.
    act: when write_tensor is called.
    assert: IoError is raised.
    """
    with pytest.raises(IoError):
        write_tensor(DenseTensor.zeros((1,)), tmp_path)
