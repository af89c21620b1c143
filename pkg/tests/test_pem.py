"""Tests for the iterative prefix-extension protocol."""

import math

import numpy as np
import pytest
from scipy import stats

from ldphh.bitstrings import BitValue
from ldphh.datagen import Dataset, DistributionSpec, GeneratorSpec, generate
from ldphh.freq_oracle import olh_params
from ldphh.metrics import GroundTruth, Identified, f1
from ldphh.pem import (
    CandidateSet,
    PemConfig,
    assign_group,
    assign_groups,
    check_prefix_consistency,
    client_report,
    extend_candidates,
    identify_round,
    plan,
    read_reports,
    round_plans,
    run_threshold,
    run_topk,
    write_reports,
)


def _uniform_dataset(values, m):
    from ldphh.bitstrings import ints_to_matrix

    return Dataset(m=m, rows=ints_to_matrix(values, m))


def test_plan_enumeration_examples():
    cfg = plan(64, 32, 1 << 20, 1.0)
    assert (cfg.gamma, cfg.eta, cfg.g) == (5, 12, 5)
    cfg = plan(16, 16, 1 << 20, 1.0)
    assert (cfg.gamma, cfg.eta, cfg.g) == (4, 12, 1)
    with pytest.raises(ValueError):
        plan(128, 2**18, 1 << 20, 1.0)


def test_plan_matches_bruteforce_enumeration_oracle():
    # Independent oracle: try every eta, keep the largest feasible.
    for m, k, limit in [(24, 4, 4096), (48, 8, 1 << 16), (32, 16, 1 << 18)]:
        gamma = (k - 1).bit_length()
        best = None
        for eta in range(1, m - gamma + 1):
            g = math.ceil((m - gamma) / eta)
            if 2 ** (gamma + eta) * g <= limit:
                best = eta
        cfg = plan(m, k, limit, 1.0)
        assert cfg.eta == best


def test_config_round_structure():
    cfg = PemConfig(m=20, gamma=3, eta=6, g=3, k=8, eps=1.0)
    assert cfg.round_etas() == (6, 6, 5)  # last round clipped to m
    assert cfg.prefix_lengths() == (9, 15, 20)
    assert cfg.round_domain_sizes() == (2**9, 8 * 2**6, 8 * 2**5)
    assert cfg.total_queries() == sum(cfg.round_domain_sizes())
    plans = round_plans(cfg)
    assert [p.prefix_len for p in plans] == [9, 15, 20]
    assert [p.domain_size for p in plans] == list(cfg.round_domain_sizes())


def test_config_validation():
    with pytest.raises(ValueError):
        PemConfig(m=20, gamma=3, eta=6, g=2, k=8, eps=1.0)  # g != ceil(17/6)
    with pytest.raises(ValueError):
        PemConfig(m=20, gamma=3, eta=6, g=3, k=8, eps=0.0)
    with pytest.raises(ValueError):
        PemConfig(m=20, gamma=3, eta=6, g=3, k=8, eps=1.0, cand_sizes=(4, 4))
    with pytest.raises(ValueError):
        PemConfig(m=20, gamma=3, eta=6, g=3, k=8, eps=1.0, query_limit=100)
    with pytest.raises(ValueError):
        PemConfig(
            m=20, gamma=3, eta=6, g=3, k=8, eps=1.0, group_fracs=(0.5, 0.2, 0.2)
        )


def test_config_per_round_overrides():
    cfg = PemConfig(
        m=16,
        gamma=4,
        eta=6,
        g=2,
        k=16,
        eps=1.0,
        etas=(4, 8),
        cand_sizes=(32, 16),
        group_fracs=(0.3, 0.7),
    )
    assert cfg.prefix_lengths() == (8, 16)
    assert cfg.round_domain_sizes() == (2**8, 32 * 2**8)


def test_assign_group_deterministic_and_uniform():
    n, g = 100_000, 5
    groups = assign_groups(n, g, master_seed=7)
    # Vectorized labels are 0-based; the scalar helper is 1-based.
    assert groups.min() >= 0 and groups.max() < g
    sample = [assign_group(i, n, g, master_seed=7) for i in range(64)]
    assert sample == (groups[:64] + 1).tolist()
    # Binomial concentration: each group within 4 sigma of n/g.
    sigma = math.sqrt(n * (1 / g) * (1 - 1 / g))
    counts = np.bincount(groups, minlength=g)
    assert np.all(np.abs(counts - n / g) < 4 * sigma)
    stat, pvalue = stats.chisquare(counts)
    assert pvalue > 0.001


def test_assign_groups_weighted_fractions():
    n = 200_000
    groups = assign_groups(n, 2, master_seed=1, fracs=(0.2, 0.8))
    share = np.mean(groups == 0)
    assert abs(share - 0.2) < 4 * math.sqrt(0.2 * 0.8 / n)


def test_client_report_prefix_lengths():
    cfg = PemConfig(m=32, gamma=4, eta=10, g=3, k=16, eps=1.0)
    rng = np.random.default_rng(0)
    v = BitValue(0xDEADBEEF, 32)
    # Group 1 reports gamma + eta = 14 bits; the last group the whole value.
    r1 = client_report(v, 1, cfg, rng)
    assert r1.group == 1
    r3 = client_report(v, 3, cfg, rng)
    assert r3.group == 3
    params = olh_params(1.0)
    assert 1 <= r1.inner.y <= params.d_prime


def test_extend_candidates_enumerates_suffixes():
    prev = CandidateSet(
        round=1, prefixes=(BitValue(0b01, 2),), estimates=(10.0,)
    )
    got = extend_candidates(prev, 2, 8)
    assert [b.bits for b in got] == [0b0100, 0b0101, 0b0110, 0b0111]
    assert all(b.m == 4 for b in got)
    empty = CandidateSet(round=1, prefixes=(), estimates=())
    assert extend_candidates(empty, 2, 8) == []


def test_extend_candidates_clips_at_m():
    prev = CandidateSet(round=1, prefixes=(BitValue(0b1, 1),), estimates=(1.0,))
    got = extend_candidates(prev, 4, 3)
    assert [b.bits for b in got] == [0b100, 0b101, 0b110, 0b111]


def test_identify_round_finds_planted_value():
    rng = np.random.default_rng(2)
    n, m, eps = 10_000, 8, 4.0
    heavy = BitValue(0x5A, m)
    cfg = PemConfig(m=m, gamma=2, eta=6, g=1, k=4, eps=eps)
    reports = [client_report(heavy, 1, cfg, rng) for _ in range(n)]
    domain = [BitValue(v, m) for v in range(256)]
    out = identify_round(reports, domain, 4, eps)
    assert out.prefixes[0] == heavy
    assert len(out.prefixes) == 4
    assert sorted(out.estimates, reverse=True) == list(out.estimates)


def test_identify_round_returns_whole_small_domain():
    rng = np.random.default_rng(3)
    cfg = PemConfig(m=4, gamma=2, eta=2, g=1, k=4, eps=1.0)
    reports = [client_report(BitValue(5, 4), 1, cfg, rng) for _ in range(50)]
    domain = [BitValue(v, 4) for v in range(3)]
    out = identify_round(reports, domain, 10, 1.0)
    assert len(out.prefixes) == 3


def test_run_topk_recovers_single_dominant_value():
    # Every user holds the same value; at eps=2 it must always surface.
    m = 16
    value = 0xBEEF
    ds = _uniform_dataset([value] * 2_000, m)
    cfg = PemConfig(m=m, gamma=2, eta=7, g=2, k=2, eps=2.0)
    hits = 0
    for seed in range(100):
        res = run_topk(ds, cfg, master_seed=seed)
        hits += res.identified[0][0].bits == value
    assert hits == 100


def test_run_topk_determinism_and_query_accounting():
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(),
        support_size=64,
        n=20_000,
        m=16,
        master_seed=5,
    )
    ds = generate(spec)
    cfg = plan(16, 8, 4096, 2.0)
    a = run_topk(ds, cfg, master_seed=11)
    b = run_topk(ds, cfg, master_seed=11)
    assert a.to_json() == b.to_json()
    assert a.queries_used == cfg.total_queries() <= 4096
    assert len(a.identified) == 8
    assert check_prefix_consistency(a)


def test_run_topk_mean_f1_non_decreasing_in_eps():
    spec = GeneratorSpec(
        dist=DistributionSpec.zipf(),
        support_size=64,
        n=20_000,
        m=16,
        master_seed=29,
    )
    ds = generate(spec)
    truth = GroundTruth.from_pairs(ds.top_k(8))
    means, ses = [], []
    for eps in (0.5, 1.0, 2.0, 4.0):
        cfg = plan(16, 8, 1 << 14, eps)
        scores = [
            f1(truth, Identified.from_pairs(run_topk(ds, cfg, master_seed=s).identified))
            for s in range(20)
        ]
        means.append(np.mean(scores))
        ses.append(np.std(scores, ddof=1) / math.sqrt(len(scores)))
    for lo, hi, se_lo, se_hi in zip(means, means[1:], ses, ses[1:]):
        assert hi >= lo - 2 * math.hypot(se_lo, se_hi)


def test_run_topk_k_exceeding_distinct_values():
    ds = _uniform_dataset([1] * 500 + [2] * 300 + [3] * 200, 8)
    cfg = PemConfig(m=8, gamma=3, eta=5, g=1, k=8, eps=2.0)
    res = run_topk(ds, cfg, master_seed=0)
    assert len(res.identified) == 8
    found = {v.bits for v, _ in res.identified[:3]}
    assert found == {1, 2, 3}


def test_run_threshold_keeps_only_frequent_estimates():
    ds = _uniform_dataset([7] * 5_000 + [9] * 4_000 + [11] * 1_000, 8)
    cfg = PemConfig(m=8, gamma=2, eta=6, g=1, k=4, eps=4.0)
    res = run_threshold(ds, cfg, theta=0.25, master_seed=1)
    found = {v.bits for v, _ in res.identified}
    assert found == {7, 9}
    for _, est in res.identified:
        assert est / ds.n > 0.25


def test_run_threshold_high_theta_returns_empty():
    ds = _uniform_dataset(list(range(100)) * 20, 8)  # flat data, f = 0.01
    cfg = PemConfig(m=8, gamma=2, eta=6, g=1, k=4, eps=1.0)
    empties = sum(
        not run_threshold(ds, cfg, theta=0.5, master_seed=s).identified
        for s in range(100)
    )
    assert empties >= 95


def test_run_threshold_rejects_bad_theta():
    ds = _uniform_dataset([1] * 10, 8)
    cfg = PemConfig(m=8, gamma=2, eta=6, g=1, k=4, eps=1.0)
    with pytest.raises(ValueError):
        run_threshold(ds, cfg, theta=0.0, master_seed=0)


def test_run_result_json_schema():
    ds = _uniform_dataset([3] * 1_000, 8)
    cfg = PemConfig(m=8, gamma=1, eta=7, g=1, k=2, eps=2.0)
    doc = run_topk(ds, cfg, master_seed=0).to_dict()
    assert doc["protocol"] == "pem"
    assert set(doc["config"]) >= {"m", "gamma", "eta", "g", "k", "eps"}
    assert all(set(item) == {"value_hex", "estimate"} for item in doc["identified"])
    assert set(doc["metrics"]) == {"f1", "ncr", "var"}
    assert doc["queries_used"] == cfg.total_queries()


def test_reports_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    cfg = PemConfig(m=16, gamma=2, eta=7, g=2, k=4, eps=1.0)
    reports = [
        client_report(BitValue(i, 16), 1 + i % 2, cfg, rng) for i in range(20)
    ]
    path = tmp_path / "reports.csv"
    write_reports(path, reports)
    assert path.read_text().splitlines()[0] == "group,seed,y"
    again = read_reports(path)
    assert [(r.group, r.inner.seed.seed, r.inner.y) for r in again] == [
        (r.group, r.inner.seed.seed, r.inner.y) for r in reports
    ]


def test_read_reports_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,seed,y\n1,5,2\nnope,1\n")
    with pytest.raises(ValueError, match=r":3:"):
        read_reports(path)


def test_run_topk_agrees_with_analytic_score():
    # Cross-module check: measured mean F1 tracks the analytic utility
    # model on matched configuration and distribution.
    from ldphh.analysis import utility_score

    dist = DistributionSpec.zipf(s=1.5)
    spec = GeneratorSpec(
        dist=dist, support_size=64, n=100_000, m=32, master_seed=41
    )
    ds = generate(spec)
    truth = GroundTruth.from_pairs(ds.top_k(8))
    cfg = plan(32, 8, 1 << 16, 4.0)
    scores = [
        f1(truth, Identified.from_pairs(run_topk(ds, cfg, master_seed=s).identified))
        for s in range(20)
    ]
    analytic = utility_score(dist, cfg, 100_000, support=64)
    assert abs(np.mean(scores) - analytic) <= 0.1
