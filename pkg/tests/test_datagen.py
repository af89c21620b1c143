"""Tests for the synthetic workload generator and dataset I/O."""

import math

import numpy as np
import pytest
from scipy import stats

from ldphh.bitstrings import BitValue
from ldphh.datagen import (
    Dataset,
    DistributionSpec,
    GeneratorSpec,
    exp_freqs,
    generate,
    load,
    load_truth,
    save,
    truth_sidecar,
    zipf_freqs,
)


def test_zipf_freqs_match_power_law_oracle():
    s, support = 1.5, 100
    freqs = zipf_freqs(s, support)
    weights = np.array([j**-s for j in range(1, support + 1)])
    np.testing.assert_allclose(freqs, weights / weights.sum(), rtol=1e-12)
    assert freqs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(freqs) < 0)


def test_zipf_top_frequency_small_support():
    # With three values, the head frequency is 1 / (1 + 2^-1.5 + 3^-1.5).
    f = zipf_freqs(1.5, 3)
    assert f[0] == pytest.approx(1 / (1 + 2**-1.5 + 3**-1.5), rel=1e-12)
    assert f[0] == pytest.approx(0.646829, abs=1e-6)


def test_zipf_drop_shifts_the_head():
    # Dropping the first 20 ranks flattens the head: rank j then carries
    # weight (j + 20)^-s.
    s, support, drop = 1.5, 50, 20
    freqs = zipf_freqs(s, support, drop)
    weights = np.array([(j + drop) ** -s for j in range(1, support + 1)])
    np.testing.assert_allclose(freqs, weights / weights.sum(), rtol=1e-12)


def test_exp_freqs_match_oracle():
    rate, support = 0.05, 64
    freqs = exp_freqs(rate, support)
    weights = np.exp(-rate * np.arange(support))
    np.testing.assert_allclose(freqs, weights / weights.sum(), rtol=1e-12)


def test_distribution_spec_dispatch_and_roundtrip():
    for spec in (
        DistributionSpec.zipf(s=2.0, drop=3),
        DistributionSpec.exponential(rate=0.1),
        DistributionSpec.empirical([0.5, 0.3, 0.2]),
    ):
        again = DistributionSpec.from_dict(spec.to_dict())
        np.testing.assert_allclose(again.freqs(3), spec.freqs(3), rtol=1e-12)


def test_empirical_freqs_are_normalized():
    spec = DistributionSpec.empirical([2.0, 1.0, 1.0])
    np.testing.assert_allclose(spec.freqs(3), [0.5, 0.25, 0.25], rtol=1e-12)
    with pytest.raises(ValueError):
        spec.freqs(4)


def test_generator_spec_validation():
    dist = DistributionSpec.zipf()
    with pytest.raises(ValueError):
        GeneratorSpec(dist=dist, support_size=0, n=10, m=8, master_seed=0)
    with pytest.raises(ValueError):
        GeneratorSpec(dist=dist, support_size=300, n=10, m=8, master_seed=0)
    with pytest.raises(ValueError):
        GeneratorSpec(dist=dist, support_size=4, n=0, m=8, master_seed=0)


def test_generate_is_deterministic_and_well_formed():
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(), support_size=32, n=5_000, m=24, master_seed=9
    )
    ds1, ds2 = generate(spec), generate(spec)
    np.testing.assert_array_equal(ds1.rows, ds2.rows)
    assert ds1.n == 5_000 and ds1.m == 24
    distinct, _ = ds1.value_counts()
    assert distinct.shape[0] <= 32


def test_generate_support_values_are_distinct():
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(), support_size=256, n=1, m=8, master_seed=3
    )
    # m = 8 with support 256 forces the full domain; all values distinct.
    ds = generate(spec)
    assert ds.n == 1


def test_generate_counts_match_distribution_chi_square():
    support = 16
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(s=1.5),
        support_size=support,
        n=1_000_000,
        m=32,
        master_seed=17,
    )
    ds = generate(spec)
    distinct, counts = ds.value_counts()
    freqs = np.sort(zipf_freqs(1.5, support))[::-1]
    observed = np.sort(counts)[::-1].astype(float)
    # Pad in case some slim tail value never appeared.
    observed = np.pad(observed, (0, support - observed.size))
    stat, pvalue = stats.chisquare(observed, freqs * spec.n)
    assert pvalue > 0.001


def test_top_k_breaks_ties_by_value():
    rows = np.array([[3], [3], [1], [1], [2]], dtype=np.uint8)
    ds = Dataset(m=8, rows=rows)
    top = ds.top_k(3)
    assert [(v.bits, c) for v, c in top] == [(1, 2), (3, 2), (2, 1)]


def test_save_and_load_roundtrip(tmp_path):
    spec = GeneratorSpec(
        dist=DistributionSpec.exponential(), support_size=16, n=500, m=20, master_seed=1
    )
    ds = generate(spec)
    path = tmp_path / "data.txt"
    sidecar = save(ds, path, spec)
    assert sidecar.name == "data.txt.truth.json"
    again = load(path, 20)
    np.testing.assert_array_equal(again.rows, ds.rows)

    truth = load_truth(sidecar)
    assert truth[:5] == ds.top_k(5)


def test_load_truth_k_validation(tmp_path):
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(), support_size=4, n=100, m=8, master_seed=2
    )
    ds = generate(spec)
    sidecar = save(ds, tmp_path / "d.txt", spec)
    with pytest.raises(ValueError):
        load_truth(sidecar, k=100)


def test_load_int_mode_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1\n2\nnot-a-number\n")
    with pytest.raises(ValueError, match="line 3"):
        load(path, 8)
    path.write_text("1\n-5\n")
    with pytest.raises(ValueError, match="line 2"):
        load(path, 8)
    path.write_text(f"{2**8}\n")
    with pytest.raises(ValueError, match="line 1"):
        load(path, 8)


def test_load_text_mode_packs_utf8_msb_first(tmp_path):
    path = tmp_path / "words.txt"
    path.write_text("ab\nxyz!\n")
    ds = load(path, 32, mode="text")
    vals = [v.bits for v in ds.values()]
    assert vals[0] == int.from_bytes(b"ab\x00\x00", "big")
    assert vals[1] == int.from_bytes(b"xyz!", "big")


def test_load_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with pytest.raises(ValueError):
        load(path, 8)


def test_truth_sidecar_is_sorted_with_value_tiebreak():
    rows = np.array([[2], [2], [7], [7], [1]], dtype=np.uint8)
    ds = Dataset(m=8, rows=rows)
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(), support_size=3, n=5, m=8, master_seed=0
    )
    doc = truth_sidecar(ds, spec)
    got = [(item["value_hex"], item["count"]) for item in doc["true_topk"]]
    assert got == [("02", 2), ("07", 2), ("01", 1)]
    assert doc["n"] == 5 and doc["m"] == 8


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(m=8, rows=np.zeros((0, 1), dtype=np.uint8))
    with pytest.raises(ValueError):
        Dataset(m=8, rows=np.zeros((3, 2), dtype=np.uint8))
