"""Tests for the deterministic seed-derivation utilities."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ldphh.randomness import (
    derive_seed,
    derive_seed_array,
    mix64,
    mix64_array,
    stream_uint64,
    stream_uniform,
)

U64 = st.integers(min_value=0, max_value=2**64 - 1)


@given(U64)
def test_mix64_stays_in_64_bits(x):
    y = mix64(x)
    assert 0 <= y < 2**64


def test_mix64_is_injective_on_sample():
    # The finalizer is a bijection on 64-bit words; a large random sample
    # must therefore be collision-free.
    xs = np.random.default_rng(0).integers(0, 2**64, size=200_000, dtype=np.uint64)
    ys = {mix64(int(x)) for x in xs[:4096]}
    assert len(ys) == 4096
    arr = mix64_array(xs)
    assert len(np.unique(arr)) == len(np.unique(xs))


@given(U64)
def test_mix64_array_matches_scalar(x):
    arr = mix64_array(np.array([x], dtype=np.uint64))
    assert int(arr[0]) == mix64(x)


def test_mix64_avalanche():
    # Flipping one input bit should flip about half the 64 output bits.
    rng = np.random.default_rng(1)
    flips = []
    for _ in range(500):
        x = int(rng.integers(0, 2**64, dtype=np.uint64))
        bit = int(rng.integers(64))
        diff = mix64(x) ^ mix64(x ^ (1 << bit))
        flips.append(bin(diff).count("1"))
    mean = np.mean(flips)
    assert 28.0 < mean < 36.0


def test_derive_seed_is_deterministic_and_label_sensitive():
    a = derive_seed(7, "alpha", 3)
    assert a == derive_seed(7, "alpha", 3)
    assert a != derive_seed(7, "alpha", 4)
    assert a != derive_seed(7, "beta", 3)
    assert a != derive_seed(8, "alpha", 3)


def test_derive_seed_array_matches_scalar_loop():
    got = derive_seed_array(99, "group", 50)
    expect = np.array([derive_seed(99, "group", i) for i in range(50)], dtype=np.uint64)
    assert got.dtype == np.uint64
    np.testing.assert_array_equal(got, expect)


def test_stream_uint64_prefix_property_and_slots():
    # A shorter draw is a prefix of a longer one; the counter selects an
    # independent slot.
    whole = stream_uint64(5, "noise", 100)
    first = stream_uint64(5, "noise", 60)
    np.testing.assert_array_equal(whole[:60], first)
    other = stream_uint64(5, "noise", 100, counter=1)
    assert not np.array_equal(whole, other)


def test_stream_uniform_range_and_determinism():
    u = stream_uniform(11, "u", 100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    np.testing.assert_array_equal(u, stream_uniform(11, "u", 100_000))


def test_stream_uniform_is_uniform_chi_square():
    # Chi-square over 64 equal bins; independently derived oracle for the
    # claim that the stream behaves like U[0, 1).
    u = stream_uniform(3, "chisq", 200_000)
    counts, _ = np.histogram(u, bins=64, range=(0.0, 1.0))
    stat, pvalue = stats.chisquare(counts)
    assert pvalue > 0.001


def test_stream_uniform_mean_and_variance():
    u = stream_uniform(4, "mv", 500_000)
    assert abs(u.mean() - 0.5) < 0.002
    assert abs(u.var() - 1.0 / 12.0) < 0.001


def test_derive_seed_reduces_master_modulo_64_bits():
    assert derive_seed(2**64 + 5, "x", 0) == derive_seed(5, "x", 0)
