# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Unit tests for baselines module."""

import numpy as np
import pytest

from elkc import baselines
from elkc.baselines import CodecKind, CodecName, Int8Code, MqeCode, TopKCode
from elkc.errors import ConfigError, FormatError, ShapeError
from elkc.quant3 import ErrorContext, dequantize3
from elkc.tensor import DenseTensor


@pytest.mark.parametrize(
    "spec, expected",
    [
        pytest.param("float32", CodecKind(name=CodecName.FLOAT32), id="float32"),
        pytest.param("3lc", CodecKind(name=CodecName.THREE_LC), id="3lc default"),
        pytest.param("3LC:1.75", CodecKind(name=CodecName.THREE_LC, s=1.75), id="3lc s"),
        pytest.param(
            "3lc:1.5:no-zre",
            CodecKind(name=CodecName.THREE_LC, s=1.5, use_zre=False),
            id="3lc no zre",
        ),
        pytest.param(
            "3lc:no-zre", CodecKind(name=CodecName.THREE_LC, use_zre=False), id="no zre only"
        ),
        pytest.param("int8", CodecKind(name=CodecName.INT8), id="int8"),
        pytest.param("stoch3", CodecKind(name=CodecName.STOCH3), id="stoch3"),
        pytest.param("mqe1", CodecKind(name=CodecName.MQE1), id="mqe1"),
        pytest.param("topk:0.05", CodecKind(name=CodecName.TOPK, fraction=0.05), id="topk"),
        pytest.param(
            "local-steps:2", CodecKind(name=CodecName.LOCAL_STEPS, local_steps=2), id="local"
        ),
    ],
)
def test_codec_kind_from_str(spec: str, expected: CodecKind):
    """
    arrange: given a valid codec specifier.
    act: when CodecKind.from_str is called.
    assert: the matching kind is returned and formats back to an equivalent specifier.
    """
    kind = CodecKind.from_str(spec)

    assert kind == expected
    assert CodecKind.from_str(str(kind)) == kind


@pytest.mark.parametrize(
    "spec",
    [
        pytest.param("gzip", id="unknown"),
        pytest.param("3lc:2.0", id="s too large"),
        pytest.param("3lc:1.99999999", id="s rounds to two"),
        pytest.param("3lc:abc", id="s not a number"),
        pytest.param("3lc:1.5:1.7", id="two s"),
        pytest.param("topk", id="topk without fraction"),
        pytest.param("topk:0", id="topk zero"),
        pytest.param("topk:1.5", id="topk above one"),
        pytest.param("local-steps:0", id="zero local steps"),
        pytest.param("local-steps:1.5", id="fractional local steps"),
        pytest.param("int8:3", id="int8 argument"),
    ],
)
def test_codec_kind_from_str_invalid(spec: str):
    """
    arrange: given a malformed codec specifier.
    act: when CodecKind.from_str is called.
    assert: ConfigError is raised.
    """
    with pytest.raises(ConfigError):
        CodecKind.from_str(spec)


@pytest.mark.parametrize(
    "data, scale, codes",
    [
        pytest.param([1.27, -1.27], 0.01, [127, -127], id="full range"),
        pytest.param([0.0, 0.0], 0.0, [0, 0], id="zeros"),
        pytest.param([2.54, 0.01, -1.0], 0.02, [127, 1, -50], id="mixed"),
    ],
)
def test_quantize8(data: list[float], scale: float, codes: list[int]):
    """
    arrange: given a tensor.
    act: when quantize8 is called.
    assert: the expected scale and symmetric codes are returned.
    """
    code = baselines.quantize8(DenseTensor(dims=(len(data),), data=data))

    assert code.scale == pytest.approx(scale)
    assert code.codes.tolist() == codes


def test_quantize8_error_bound():
    """
    arrange: given a random tensor.
    act: when it is quantized and dequantized.
    assert: codes stay within [-127, 127] and the error is at most scale / 2.
    """
    data = np.random.default_rng(5).standard_normal(1000).astype(np.float32)
    tensor = DenseTensor.from_array(data)

    code = baselines.quantize8(tensor)
    restored = baselines.dequantize8(code, tensor.dims)

    assert code.codes.min() >= -127
    assert code.codes.max() <= 127
    assert np.abs(restored.data - data).max() <= code.scale / 2 * (1 + 1e-5)


def test_stoch_quantize3_boundaries():
    """
    arrange: given a tensor holding its maximum, its negated maximum and zero.
    act: when stoch_quantize3 is called repeatedly.
    assert: the maximum always maps to 1, its negation to -1 and zero to 0.
    """
    tensor = DenseTensor(dims=(3,), data=[0.7, -0.7, 0.0])
    rng = np.random.default_rng(0)

    for _ in range(50):
        q = baselines.stoch_quantize3(tensor, rng)
        assert q.values.tolist() == [1, -1, 0]
        assert q.m == pytest.approx(0.7)


def test_stoch_quantize3_zero_tensor():
    """
    arrange: given a zero tensor.
    act: when stoch_quantize3 is called.
    assert: all values are zero and m = 0.
    """
    q = baselines.stoch_quantize3(DenseTensor.zeros((4,)), np.random.default_rng(0))

    assert q.m == 0.0
    assert not q.values.any()


def test_stoch_quantize3_unbiased():
    """
    arrange: given 10^5 entries of 0.3 next to a maximum of 1.0.
    act: when they are quantized stochastically.
    assert: the mean dequantized entry lies within 4 sigma of 0.3.
    """
    draws = 100_000
    data = np.full(draws + 1, 0.3, dtype=np.float32)
    data[0] = 1.0

    q = baselines.stoch_quantize3(DenseTensor.from_array(data), np.random.default_rng(11))

    sigma = np.sqrt(0.3 * 0.7 / draws)
    assert abs(dequantize3(q).data[1:].astype(np.float64).mean() - 0.3) < 4 * sigma


def test_stoch_quantize3_deterministic_under_seed():
    """
    arrange: given two generators with the same seed.
    act: when the same tensor is quantized with each.
    assert: the outputs are identical.
    """
    tensor = DenseTensor.from_array(np.linspace(-1, 1, 101))

    first = baselines.stoch_quantize3(tensor, np.random.default_rng(9))
    second = baselines.stoch_quantize3(tensor, np.random.default_rng(9))

    assert first == second


def test_mqe_quantize1():
    """
    arrange: given a fresh context.
    act: when [1, 3, -2] is quantized to one bit.
    assert: the per-sign means are 2 and -2 and the residual is kept.
    """
    ctx = ErrorContext((3,))

    code = baselines.mqe_quantize1(ctx, DenseTensor(dims=(3,), data=[1.0, 3.0, -2.0]))

    assert code.m_pos == 2.0
    assert code.m_neg == -2.0
    assert code.bits.tolist() == [True, True, False]
    assert ctx.buffer.data.tolist() == [-1.0, 1.0, 0.0]


def test_mqe_quantize1_zeros():
    """
    arrange: given a fresh context.
    act: when a zero tensor is quantized.
    assert: all bits are set and both means are zero.
    """
    code = baselines.mqe_quantize1(ErrorContext((4,)), DenseTensor.zeros((4,)))

    assert code.bits.all()
    assert code.m_pos == 0.0
    assert code.m_neg == 0.0


def test_mqe_quantize1_means_minimize_squared_error():
    """
    arrange: given a random tensor.
    act: when it is quantized and candidate reconstructions are scanned around each mean.
    assert: no candidate has a lower squared error within its partition.
    """
    data = np.random.default_rng(2).standard_normal(200).astype(np.float64)

    code = baselines.mqe_quantize1(ErrorContext((200,)), DenseTensor.from_array(data))

    for mean, part in ((code.m_pos, data[data >= 0]), (code.m_neg, data[data < 0])):
        best = np.sum((part - mean) ** 2)
        for candidate in np.linspace(mean - 0.5, mean + 0.5, 101):
            assert np.sum((part - candidate) ** 2) >= best - 1e-6


def test_mqe_quantize1_shape_mismatch():
    """
    arrange: given a context of three elements.
    act: when a tensor of two elements is quantized.
    assert: ShapeError is raised.
    """
    with pytest.raises(ShapeError):
        baselines.mqe_quantize1(ErrorContext((3,)), DenseTensor.zeros((2,)))


def _conservation(compress, steps: int = 100, size: int = 50) -> None:
    """Feed random tensors through a codec with error feedback and check the totals.

    Args:
        compress: Maps a context and tensor to the transmitted dense tensor.
        steps: The number of inputs.
        size: The tensor size.
    """
    rng = np.random.default_rng(17)
    ctx = ErrorContext((size,))
    inputs = rng.standard_normal((steps, size)).astype(np.float32)
    sent = np.zeros(size, dtype=np.float64)
    for row in inputs:
        sent += compress(ctx, DenseTensor.from_array(row)).data
    expected = inputs.astype(np.float64).sum(axis=0)
    np.testing.assert_allclose(
        sent + ctx.buffer.data, expected, rtol=1e-5, atol=1e-5 * np.abs(expected).max()
    )


def test_mqe_conservation():
    """
    arrange: given a 1-bit context and 100 random tensors.
    act: when every tensor is quantized.
    assert: transmitted values plus the buffer equal the input sum.
    """
    _conservation(
        lambda ctx, t: baselines.mqe_dequantize(baselines.mqe_quantize1(ctx, t), t.dims)
    )


def test_topk_sparsify():
    """
    arrange: given a fresh context.
    act: when [5, -1, 3, 0] is sparsified to half its entries.
    assert: the two largest entries are sent and the rest stays in the buffer.
    """
    ctx = ErrorContext((4,))

    code = baselines.topk_sparsify(ctx, DenseTensor(dims=(4,), data=[5, -1, 3, 0]), 0.5)

    assert code.bitmap.tolist() == [True, False, True, False]
    assert code.values.tolist() == [5.0, 3.0]
    assert ctx.buffer.data.tolist() == [0.0, -1.0, 0.0, 0.0]


def test_topk_sparsify_ties_prefer_lower_index():
    """
    arrange: given entries of equal magnitude.
    act: when one of them is selected.
    assert: the lowest index wins.
    """
    code = baselines.topk_sparsify(
        ErrorContext((4,)), DenseTensor(dims=(4,), data=[1, -2, 2, -2]), 0.25
    )

    assert code.bitmap.tolist() == [False, True, False, False]


def test_topk_sparsify_full_fraction():
    """
    arrange: given a fresh context.
    act: when every entry is selected.
    assert: the buffer is zeroed.
    """
    ctx = ErrorContext((3,))

    code = baselines.topk_sparsify(ctx, DenseTensor(dims=(3,), data=[1, 2, 3]), 1.0)

    assert code.bitmap.all()
    assert not ctx.buffer.data.any()


@pytest.mark.parametrize(
    "fraction, size, k",
    [
        pytest.param(0.05, 100, 5, id="five percent"),
        pytest.param(0.07, 100, 7, id="no float overshoot"),
        pytest.param(0.25, 10, 3, id="rounds up"),
        pytest.param(0.001, 10, 1, id="at least one"),
    ],
)
def test_topk_count(fraction: float, size: int, k: int):
    """
    arrange: given a fraction and a tensor size.
    act: when topk_count is called.
    assert: ceil(fraction * size) is returned.
    """
    assert baselines.topk_count(fraction, size) == k


def test_topk_conservation():
    """
    arrange: given a top-k context and 100 random tensors.
    act: when every tensor is sparsified to a quarter.
    assert: transmitted values plus the buffer equal the input sum.
    """
    _conservation(
        lambda ctx, t: baselines.topk_densify(baselines.topk_sparsify(ctx, t, 0.25), t.dims)
    )


def test_topk_payload_size():
    """
    arrange: given a 1000 element tensor.
    act: when 5% is sparsified and packed.
    assert: the payload holds 125 bitmap bytes and 50 values, 2.6 bits per value.
    """
    tensor = DenseTensor.from_array(np.arange(1000, dtype=np.float32))

    payload = baselines.pack_topk(baselines.topk_sparsify(ErrorContext((1000,)), tensor, 0.05))

    assert len(payload) == 125 + 4 * 50
    assert len(payload) * 8 / 1000 == 2.6


def test_local_step_gate():
    """
    arrange: given a gate with a period of two.
    act: when [1] and [2] are fed on steps 0 and 1.
    assert: nothing is emitted at step 0 and the sum [3] is emitted at step 1.
    """
    ctx = ErrorContext((1,))

    first = baselines.local_step_gate(ctx, DenseTensor(dims=(1,), data=[1.0]), 0, 2)
    second = baselines.local_step_gate(ctx, DenseTensor(dims=(1,), data=[2.0]), 1, 2)

    assert first is None
    assert second == DenseTensor(dims=(1,), data=[3.0])
    assert ctx.buffer == DenseTensor.zeros((1,))


def test_local_step_gate_passthrough():
    """
    arrange: given a gate with a period of one.
    act: when tensors are fed.
    assert: every tensor is emitted unchanged.
    """
    ctx = ErrorContext((2,))

    for step in range(3):
        tensor = DenseTensor(dims=(2,), data=[step, -step])
        assert baselines.local_step_gate(ctx, tensor, step, 1) == tensor


def test_local_step_gate_conservation():
    """
    arrange: given a gate with a period of three.
    act: when 12 tensors are fed.
    assert: the emissions add up to the inputs.
    """
    ctx = ErrorContext((2,))
    inputs = np.random.default_rng(4).standard_normal((12, 2)).astype(np.float32)

    emitted = [
        baselines.local_step_gate(ctx, DenseTensor.from_array(row), step, 3)
        for step, row in enumerate(inputs)
    ]

    assert [e is not None for e in emitted] == [False, False, True] * 4
    total = sum(e.data.astype(np.float64) for e in emitted if e is not None)
    np.testing.assert_allclose(total, inputs.astype(np.float64).sum(axis=0), rtol=1e-5)


def test_local_step_gate_invalid_period():
    """
    arrange: given a period of zero.
    act: when local_step_gate is called.
    assert: ConfigError is raised.
    """
    with pytest.raises(ConfigError):
        baselines.local_step_gate(ErrorContext((1,)), DenseTensor.zeros((1,)), 0, 0)


def test_pack_mqe_layout():
    """
    arrange: given a 1-bit code of ten entries.
    act: when it is packed.
    assert: both means precede a little bit order bitmap.
    """
    bits = np.array([1, 0, 0, 0, 0, 0, 0, 1, 1, 0], dtype=bool)

    payload = baselines.pack_mqe(MqeCode(m_neg=-1.0, m_pos=2.0, bits=bits))

    assert payload[:8] == np.array([-1.0, 2.0], dtype="<f4").tobytes()
    assert payload[8:] == bytes([0b10000001, 0b00000001])
    assert baselines.unpack_mqe(payload, 10).bits.tolist() == bits.tolist()


def test_pack_int8_layout():
    """
    arrange: given 8-bit codes.
    act: when they are packed and unpacked.
    assert: the scale precedes one byte per code and both are restored.
    """
    code = Int8Code(scale=0.5, codes=np.array([127, -127, 0], dtype=np.int8))

    payload = baselines.pack_int8(code)
    restored = baselines.unpack_int8(payload, 3)

    assert len(payload) == 7
    assert restored.scale == 0.5
    assert restored.codes.tolist() == [127, -127, 0]


@pytest.mark.parametrize(
    "unpack, payload, size",
    [
        pytest.param(baselines.unpack_int8, b"\0" * 6, 3, id="int8 short"),
        pytest.param(
            baselines.unpack_int8,
            np.float32(1).tobytes() + bytes([0x80]),
            1,
            id="int8 minus 128",
        ),
        pytest.param(baselines.unpack_mqe, b"\0" * 9, 10, id="mqe short"),
        pytest.param(
            baselines.unpack_mqe, b"\0" * 8 + bytes([0, 0b100]), 10, id="mqe padding bit"
        ),
        pytest.param(baselines.unpack_topk, b"", 10, id="topk missing bitmap"),
        pytest.param(baselines.unpack_topk, bytes([1, 0]), 10, id="topk missing value"),
        pytest.param(baselines.unpack_float32, b"\0" * 5, 1, id="float32 trailing"),
    ],
)
def test_unpack_malformed(unpack, payload: bytes, size: int):
    """
    arrange: given a payload violating its codec layout.
    act: when it is unpacked.
    assert: FormatError is raised.
    """
    with pytest.raises(FormatError):
        unpack(payload, size)


def test_pack_topk_round_trip():
    """
    arrange: given a sparsification of ten entries.
    act: when it is packed and unpacked.
    assert: bitmap and values are restored.
    """
    bitmap = np.zeros(10, dtype=bool)
    bitmap[[2, 9]] = True
    code = TopKCode(bitmap=bitmap, values=np.array([1.5, -2.0], dtype=np.float32))

    restored = baselines.unpack_topk(baselines.pack_topk(code), 10)

    assert restored.bitmap.tolist() == bitmap.tolist()
    assert restored.values.tolist() == [1.5, -2.0]
