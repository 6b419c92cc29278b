"""Codec unit tests: published value examples, the exhaustive-scan oracle,
and the 1-bit error-feedback quantizer."""

from __future__ import annotations

import io

import numpy as np
import pytest

from approx8.codecs import (
    SIGN_MASK,
    Codebook,
    DataTypeKind,
    DataTypeSpec,
    NormKind,
    OneBitState,
    build_codebook,
    decode_buffer,
    encode_buffer,
    onebit_decode,
    onebit_quantize,
    roundtrip,
)
from approx8.errors import ConfigError, InputError, UsageError

from oracles import oracle_encode_codes

ALL_KINDS = list(DataTypeKind)

ALL_SPECS = [
    DataTypeSpec(DataTypeKind.DYNAMIC_TREE),
    DataTypeSpec(DataTypeKind.DYNAMIC_TREE, NormKind.ABSMAX),
    DataTypeSpec(DataTypeKind.LINEAR),
    DataTypeSpec(DataTypeKind.LINEAR, NormKind.ABSMAX),
    DataTypeSpec(DataTypeKind.STATIC_TREE),
    DataTypeSpec(DataTypeKind.STATIC_TREE, NormKind.DECADE, 1),
    DataTypeSpec(DataTypeKind.MANTISSA),
    DataTypeSpec(DataTypeKind.MANTISSA, NormKind.DECADE, 2),
]


def enc1(value: float, spec: DataTypeSpec) -> float:
    cb = build_codebook(spec)
    q = encode_buffer(np.array([value], dtype=np.float32), cb)
    return float(decode_buffer(q, cb)[0])


def local_step(cb: Codebook, value: float) -> float:
    """Gap between the two codebook values bracketing |value|."""
    vals = cb.sorted_values
    i = int(np.searchsorted(vals, abs(value)))
    i = min(max(i, 1), len(vals) - 1)
    return float(vals[i] - vals[i - 1])


# ---------------------------------------------------------------------------
# table construction


def test_decode_table_shape_and_dtype():
    for spec in ALL_SPECS:
        cb = build_codebook(spec)
        assert cb.decode_table.shape == (256,)
        assert cb.decode_table.dtype == np.float32


def test_sign_bit_mirrors_all_values():
    for kind in ALL_KINDS:
        cb = build_codebook(DataTypeSpec(kind))
        t = cb.decode_table
        for payload in range(128):
            assert t[payload | SIGN_MASK] == -t[payload] or (
                t[payload] == 0.0 and t[payload | SIGN_MASK] == 0.0
            )


def test_zero_code_is_byte_zero_and_decodes_to_zero():
    for kind in ALL_KINDS:
        cb = build_codebook(DataTypeSpec(kind))
        assert cb.zero_code == 0
        assert cb.decode_table[0] == 0.0
        assert cb.decode_table[SIGN_MASK] == 0.0  # -0 folds to +0


def test_no_negative_zero_in_table():
    for kind in ALL_KINDS:
        table = build_codebook(DataTypeSpec(kind)).decode_table
        zero = table[table == 0.0]
        assert not np.any(np.signbit(zero))


def test_sorted_values_distinct_ascending():
    for kind in ALL_KINDS:
        cb = build_codebook(DataTypeSpec(kind))
        assert np.all(np.diff(cb.sorted_values) > 0)
        assert cb.sorted_values[0] == 0.0
        # canonical code for every distinct value decodes back to it
        assert np.array_equal(
            cb.decode_table[cb.sorted_codes].astype(np.float64), cb.sorted_values
        )


def test_value_counts_per_kind():
    # distinct non-negative values: 1 zero + the nonzero grid
    expect = {
        DataTypeKind.DYNAMIC_TREE: 128,  # 127 leaves + 0
        DataTypeKind.STATIC_TREE: 128,  # 8 exponents x 16 leaves - sacrificed leaf + 0
        DataTypeKind.LINEAR: 128,  # 0..127 / 127
        DataTypeKind.MANTISSA: 114,  # duplicates collapse (m x 10^-e collisions)
    }
    for kind, n in expect.items():
        cb = build_codebook(DataTypeSpec(kind))
        assert len(cb.sorted_values) == n, kind


def test_build_codebook_is_cached():
    spec = DataTypeSpec(DataTypeKind.LINEAR)
    assert build_codebook(spec) is build_codebook(DataTypeSpec(DataTypeKind.LINEAR))


def test_tables_are_read_only():
    cb = build_codebook(DataTypeSpec(DataTypeKind.DYNAMIC_TREE))
    with pytest.raises(ValueError):
        cb.decode_table[0] = 1.0


# ---------------------------------------------------------------------------
# published value examples


def test_mantissa_digit_times_power():
    # m=2, e=1 -> 2 * 10^-1
    assert enc1(0.2, DataTypeSpec(DataTypeKind.MANTISSA)) == pytest.approx(0.2, rel=1e-6)
    cb = build_codebook(DataTypeSpec(DataTypeKind.MANTISSA))
    assert cb.decode_table[0x12] == np.float32(0.2)  # high nibble e, low nibble m


def test_mantissa_max_value():
    cb = build_codebook(DataTypeSpec(DataTypeKind.MANTISSA))
    assert float(cb.sorted_values[-1]) == 15.0  # m=15, e=0


def test_dynamic_smallest_code():
    # payload 0b0000001: six leading zeros then the flag, empty tree suffix
    cb = build_codebook(DataTypeSpec(DataTypeKind.DYNAMIC_TREE))
    assert cb.decode_table[0x01] == np.float32(0.55e-6)


def test_dynamic_tree_reference_points():
    # within one codebook step of the published roundings
    spec = DataTypeSpec(DataTypeKind.DYNAMIC_TREE, NormKind.ABSMAX)
    cb = build_codebook(spec)
    q = encode_buffer(np.array([0.2345678, 1.0], dtype=np.float32), cb)
    got = float(decode_buffer(q, cb)[0])
    assert abs(got - 0.236719) <= local_step(cb, 0.2345678)

    spec = DataTypeSpec(DataTypeKind.DYNAMIC_TREE)
    cb = build_codebook(spec)
    got = enc1(0.0000234, spec)
    assert abs(got - 1.9e-5) <= local_step(cb, 0.0000234)


def test_linear_equal_steps():
    cb = build_codebook(DataTypeSpec(DataTypeKind.LINEAR))
    assert cb.decode_table[127] == 1.0
    assert cb.decode_table[1] == np.float32(1.0 / 127.0)
    steps = np.diff(cb.sorted_values)
    # the table is float32, so adjacent differences wobble in the last ulp
    assert np.allclose(steps, 1.0 / 127.0, atol=2e-7)


def test_static_tree_sacrificed_leaf():
    # payload 0 is the zero code, so the (e=0, k=0) leaf value has no code
    cb = build_codebook(DataTypeSpec(DataTypeKind.STATIC_TREE))
    missing = 0.1 + 0.5 * 0.9 / 16.0
    assert not np.any(np.isclose(cb.decode_table, missing, rtol=1e-6))
    # but the same leaf at other exponents exists
    assert np.any(np.isclose(cb.decode_table, missing / 10.0, rtol=1e-6))


def test_static_tree_exponent_range():
    cb = build_codebook(DataTypeSpec(DataTypeKind.STATIC_TREE))
    nonzero = cb.sorted_values[cb.sorted_values > 0]
    # k=0 only lacks a code at e=0 (that payload byte is the zero code)
    assert float(nonzero.min()) == pytest.approx((0.1 + 0.5 * 0.9 / 16) * 1e-7, rel=1e-6)
    assert float(nonzero.max()) == pytest.approx(0.1 + 15.5 * 0.9 / 16, rel=1e-6)


# ---------------------------------------------------------------------------
# encode/decode behaviour


def test_roundtrip_identity_on_table_values():
    # every decodable value re-encodes to itself
    for spec in [DataTypeSpec(k) for k in ALL_KINDS]:
        cb = build_codebook(spec)
        values = cb.decode_table.astype(np.float32)
        assert np.array_equal(roundtrip(values, spec), values), spec.label()


def test_encode_zero_gives_zero_code():
    for spec in ALL_SPECS:
        cb = build_codebook(spec)
        q = encode_buffer(np.zeros(5, dtype=np.float32), cb)
        assert np.all(q.codes == cb.zero_code), spec.label()
        assert np.all(decode_buffer(q, cb) == 0.0)


def test_empty_buffer():
    cb = build_codebook(DataTypeSpec(DataTypeKind.LINEAR, NormKind.ABSMAX))
    q = encode_buffer(np.empty((0, 3), dtype=np.float32), cb)
    assert q.codes.size == 0 and q.scale == 1.0
    assert decode_buffer(q, cb).shape == (0, 3)


def test_non_finite_rejected():
    cb = build_codebook(DataTypeSpec(DataTypeKind.LINEAR))
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(InputError):
            encode_buffer(np.array([0.5, bad]), cb)


def test_shape_preserved():
    cb = build_codebook(DataTypeSpec(DataTypeKind.MANTISSA))
    x = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(np.float32)
    q = encode_buffer(x, cb)
    assert q.shape == (3, 4, 5)
    assert decode_buffer(q, cb).shape == (3, 4, 5)


def test_tie_breaks_toward_smaller_magnitude():
    cb = build_codebook(DataTypeSpec(DataTypeKind.LINEAR))
    # exact midpoint of the first step (halving a float is exact)
    mid = float(cb.sorted_values[1]) / 2.0
    q = encode_buffer(np.array([mid, -mid]), cb)
    assert q.codes[0] == cb.zero_code
    assert q.codes[1] == cb.zero_code  # -0 is still the zero code


def test_sign_symmetry_of_encode():
    rng = np.random.default_rng(3)
    x = (rng.normal(size=512) * 10.0 ** rng.integers(-6, 2, size=512)).astype(np.float32)
    for spec in [DataTypeSpec(k) for k in ALL_KINDS]:
        cb = build_codebook(spec)
        pos = decode_buffer(encode_buffer(x, cb), cb)
        neg = decode_buffer(encode_buffer(-x, cb), cb)
        assert np.array_equal(pos, -neg), spec.label()


def test_absmax_bounds_decoded_range():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1000).astype(np.float32) * 37.5
    for kind in (DataTypeKind.DYNAMIC_TREE, DataTypeKind.LINEAR):
        spec = DataTypeSpec(kind, NormKind.ABSMAX)
        out = roundtrip(x, spec)
        assert np.max(np.abs(out)) <= np.max(np.abs(x)) * (1 + 1e-6), kind


def test_absmax_all_zero_buffer_scale_one():
    cb = build_codebook(DataTypeSpec(DataTypeKind.DYNAMIC_TREE, NormKind.ABSMAX))
    q = encode_buffer(np.zeros(4), cb)
    assert q.scale == 1.0


def test_decade_scale_direction():
    # decade +2 divides by 100 before encoding and multiplies back after
    spec = DataTypeSpec(DataTypeKind.MANTISSA, NormKind.DECADE, 2)
    assert enc1(20.0, spec) == pytest.approx(20.0, rel=1e-6)
    assert enc1(230.0, spec) == pytest.approx(200.0, rel=1e-6)  # 2x10^-1 x 10^2


def test_decode_spec_mismatch_raises():
    cb_lin = build_codebook(DataTypeSpec(DataTypeKind.LINEAR))
    cb_dyn = build_codebook(DataTypeSpec(DataTypeKind.DYNAMIC_TREE))
    q = encode_buffer(np.array([0.5]), cb_lin)
    with pytest.raises(UsageError):
        decode_buffer(q, cb_dyn)


def test_monotone_within_buffer():
    rng = np.random.default_rng(5)
    x = np.sort(rng.uniform(0, 5, size=300).astype(np.float32))
    for spec in ALL_SPECS:
        out = roundtrip(x, spec)
        assert np.all(np.diff(out) >= 0), spec.label()


# ---------------------------------------------------------------------------
# normalization compatibility


def test_norm_compatibility_matrix():
    DataTypeSpec(DataTypeKind.DYNAMIC_TREE, NormKind.ABSMAX)
    DataTypeSpec(DataTypeKind.STATIC_TREE, NormKind.DECADE, -3)
    with pytest.raises(ConfigError):
        DataTypeSpec(DataTypeKind.DYNAMIC_TREE, NormKind.DECADE, 1)
    with pytest.raises(ConfigError):
        DataTypeSpec(DataTypeKind.MANTISSA, NormKind.ABSMAX)
    with pytest.raises(ConfigError):
        DataTypeSpec(DataTypeKind.STATIC_TREE, NormKind.DECADE, 8)
    with pytest.raises(ConfigError):
        DataTypeSpec(DataTypeKind.LINEAR, NormKind.NONE, 2)


# ---------------------------------------------------------------------------
# the exhaustive-scan encode oracle


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_encode_matches_linear_scan_oracle(spec):
    rng = np.random.default_rng(hash(spec.label()) % 2**32)
    x = rng.normal(size=4000) * 10.0 ** rng.integers(-8, 3, size=4000)
    # salt with exact codebook values, zeros, and midpoints
    cb = build_codebook(spec)
    salt = np.concatenate([cb.decode_table, [0.0], cb.sorted_values[:-1] * 1.0000001])
    x = np.concatenate([x, salt]).astype(np.float32)
    q = encode_buffer(x, cb)
    assert np.array_equal(q.codes, oracle_encode_codes(x, cb)), spec.label()


def test_oracle_on_exact_midpoints():
    # ties must fall to the smaller magnitude in both implementations
    cb = build_codebook(DataTypeSpec(DataTypeKind.LINEAR))
    vals = cb.sorted_values
    mids = ((vals[:-1] + vals[1:]) / 2.0).astype(np.float64)
    q = encode_buffer(mids, cb)
    assert np.array_equal(q.codes, oracle_encode_codes(mids, cb))
    assert np.array_equal(q.codes, cb.sorted_codes[:-1])  # all round down


# ---------------------------------------------------------------------------
# codebook dump format


def test_dump_format():
    cb = build_codebook(DataTypeSpec(DataTypeKind.MANTISSA))
    buf = io.StringIO()
    cb.dump(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 256
    assert lines[0] == "0x00\t0"
    assert lines[0x12] == f"0x12\t{np.float32(0.2):.9g}"
    for i, line in enumerate(lines):
        code_str, value_str = line.split("\t")
        assert code_str == f"0x{i:02x}"
        assert float(value_str) == cb.decode_table[i]


# ---------------------------------------------------------------------------
# 1-bit quantizer with error feedback


def test_onebit_two_sided_means():
    g = np.array([1.0, -1.0, 3.0, -5.0])
    state = OneBitState.zeros(g.shape)
    q = onebit_quantize(g, state)
    out = onebit_decode(q)
    # columns split by sign; each side reconstructs to its mean
    assert q.pos_level == pytest.approx(2.0)  # mean of {1, 3}
    assert q.neg_level == pytest.approx(-3.0)  # mean of {-1, -5}
    assert np.allclose(out, [2.0, -3.0, 2.0, -3.0])
    assert np.allclose(state.residual, g - out)


def test_onebit_constant_buffer_is_exact():
    g = np.full((3, 3), 0.75)
    state = OneBitState.zeros(g.shape)
    out = onebit_decode(onebit_quantize(g, state))
    assert np.allclose(out, g)
    assert np.allclose(state.residual, 0.0)


def test_onebit_packs_bits():
    g = np.ones(17)
    q = onebit_quantize(g, OneBitState.zeros(g.shape))
    assert q.nbits == 1
    assert q.codes.size == 3  # ceil(17/8) bytes
    assert onebit_decode(q).shape == (17,)


def test_onebit_residual_identity_every_step():
    # residual_t = corrected_t - decode_t, bit-exact, for every step
    rng = np.random.default_rng(6)
    state = OneBitState.zeros((8, 4))
    for _ in range(50):
        g = rng.normal(size=(8, 4))
        prev = state.residual.copy()
        q = onebit_quantize(g, state)
        out = onebit_decode(q).astype(np.float64)
        assert np.array_equal(state.residual, (g + prev) - out)


def test_onebit_error_feedback_telescopes():
    # sum of decodes tracks sum of raw gradients to within one residual
    rng = np.random.default_rng(7)
    state = OneBitState.zeros(64)
    total_g = np.zeros(64)
    total_out = np.zeros(64)
    for _ in range(100):
        g = rng.normal(size=64)
        total_g += g
        total_out += onebit_decode(onebit_quantize(g, state))
    assert np.allclose(total_g - total_out, state.residual, atol=1e-9)


def test_onebit_state_shape_mismatch():
    state = OneBitState.zeros((4,))
    with pytest.raises(UsageError):
        onebit_quantize(np.ones((5,)), state)


def test_onebit_rejects_non_finite():
    state = OneBitState.zeros((2,))
    with pytest.raises(InputError):
        onebit_quantize(np.array([1.0, np.nan]), state)
