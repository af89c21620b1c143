"""Tests for fixed-width bit-string values and their packed matrices."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldphh.bitstrings import (
    BitValue,
    extend_matrix,
    hex_width,
    ints_to_matrix,
    matrix_to_hex,
    matrix_to_ints,
    matrix_to_uint64,
    num_bytes,
    order_rows,
    prefix_matrix,
    rows_from_bitvalues,
    slice_matrix,
    unique_rows_with_counts,
)

widths = st.integers(min_value=1, max_value=96)


@st.composite
def value_lists(draw, max_width=96, max_len=20):
    m = draw(st.integers(min_value=1, max_value=max_width))
    n = draw(st.integers(min_value=1, max_value=max_len))
    vals = draw(
        st.lists(st.integers(min_value=0, max_value=2**m - 1), min_size=n, max_size=n)
    )
    return m, vals


def test_num_bytes_and_hex_width():
    assert [num_bytes(w) for w in (1, 8, 9, 16, 64, 65)] == [1, 1, 2, 2, 8, 9]
    assert [hex_width(w) for w in (1, 4, 5, 8, 64)] == [1, 1, 2, 2, 16]


def test_bitvalue_validation():
    with pytest.raises(ValueError):
        BitValue(4, 2)
    with pytest.raises(ValueError):
        BitValue(-1, 4)
    with pytest.raises(ValueError):
        BitValue(1, 0)
    assert BitValue(0, 0).m == 0


def test_bitvalue_prefix_and_extend():
    v = BitValue(0b101101, 6)
    assert v.prefix(3) == BitValue(0b101, 3)
    assert v.prefix(6) == v
    assert v.prefix(0) == BitValue(0, 0)
    assert BitValue(0b101, 3).extend(0b10, 2) == BitValue(0b10110, 5)
    with pytest.raises(ValueError):
        v.prefix(7)


def test_bitvalue_hex_roundtrip():
    v = BitValue(0xBEEF, 16)
    assert v.to_hex() == "beef"
    assert BitValue.from_hex("beef", 16) == v
    # A width that is not a nibble multiple still round-trips.
    w = BitValue(0b10111, 5)
    assert BitValue.from_hex(w.to_hex(), 5) == w


def test_bitvalue_ordering_is_by_value():
    assert BitValue(1, 8) < BitValue(2, 8)
    assert sorted([BitValue(9, 8), BitValue(3, 8)])[0] == BitValue(3, 8)


@given(value_lists())
@settings(max_examples=200, deadline=None)
def test_ints_matrix_roundtrip(case):
    m, vals = case
    mat = ints_to_matrix(vals, m)
    assert mat.shape == (len(vals), num_bytes(m))
    assert mat.dtype == np.uint8
    assert matrix_to_ints(mat, m) == vals


@given(value_lists(max_width=64))
@settings(max_examples=100, deadline=None)
def test_matrix_to_uint64_matches_ints(case):
    m, vals = case
    mat = ints_to_matrix(vals, m)
    np.testing.assert_array_equal(
        matrix_to_uint64(mat, m), np.array(vals, dtype=np.uint64)
    )


def test_matrix_padding_bits_are_zero():
    mat = ints_to_matrix([(1 << 13) - 1], 13)
    # 13 bits occupy the top of two bytes; the last three bits must be 0.
    assert mat[0, 1] & 0b111 == 0


@given(value_lists(max_width=64), st.data())
@settings(max_examples=150, deadline=None)
def test_slice_matrix_matches_python_bit_arithmetic(case, data):
    m, vals = case
    start = data.draw(st.integers(min_value=0, max_value=m - 1))
    width = data.draw(st.integers(min_value=1, max_value=m - start))
    mat = ints_to_matrix(vals, m)
    got = matrix_to_ints(slice_matrix(mat, m, start, width), width)
    expect = [(v >> (m - start - width)) & ((1 << width) - 1) for v in vals]
    assert got == expect


@given(value_lists(), st.data())
@settings(max_examples=150, deadline=None)
def test_prefix_matrix_matches_scalar_prefix(case, data):
    m, vals = case
    plen = data.draw(st.integers(min_value=1, max_value=m))
    mat = ints_to_matrix(vals, m)
    got = matrix_to_ints(prefix_matrix(mat, plen), plen)
    expect = [BitValue(v, m).prefix(plen).bits for v in vals]
    assert got == expect


def test_extend_matrix_enumerates_prefix_major():
    prefixes = ints_to_matrix([0b10, 0b01], 2)
    ext = extend_matrix(prefixes, 2, 2)
    got = matrix_to_ints(ext, 4)
    # Each prefix keeps its block; extensions count up within the block.
    assert got == [0b1000, 0b1001, 0b1010, 0b1011, 0b0100, 0b0101, 0b0110, 0b0111]


def test_order_rows_sorts_by_estimate_then_value():
    mat = ints_to_matrix([5, 3, 9, 1], 4)
    est = np.array([1.0, 2.0, 2.0, 0.5])
    order = order_rows(mat, est)
    # Estimate descending; the tie between values 3 and 9 breaks value-asc.
    assert matrix_to_ints(mat[order], 4) == [3, 9, 5, 1]


@given(value_lists(max_width=32, max_len=40))
@settings(max_examples=100, deadline=None)
def test_order_rows_matches_python_sort(case):
    m, vals = case
    mat = ints_to_matrix(vals, m)
    est = np.arange(len(vals), dtype=np.float64) % 3
    order = order_rows(mat, est)
    got = [(float(est[i]), vals[i]) for i in order]
    expect = sorted(zip(est, vals), key=lambda t: (-t[0], t[1]))
    assert got == [(float(e), v) for e, v in expect]


@given(value_lists(max_width=24, max_len=60))
@settings(max_examples=100, deadline=None)
def test_unique_rows_match_counter(case):
    from collections import Counter

    m, vals = case
    mat = ints_to_matrix(vals, m)
    uniq, counts = unique_rows_with_counts(mat)
    got = dict(zip(matrix_to_ints(uniq, m), counts.tolist()))
    assert got == dict(Counter(vals))
    # Distinct rows come back in ascending value order.
    assert matrix_to_ints(uniq, m) == sorted(set(vals))


def test_matrix_to_hex_and_rows_from_bitvalues():
    vals = [BitValue(0xAB, 8), BitValue(0x01, 8)]
    mat = rows_from_bitvalues(vals, 8)
    assert matrix_to_hex(mat, 8) == ["ab", "01"]


def test_rows_from_bitvalues_rejects_width_mismatch():
    with pytest.raises(ValueError):
        rows_from_bitvalues([BitValue(1, 4)], 8)
