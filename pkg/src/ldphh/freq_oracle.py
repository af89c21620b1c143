"""Frequency-oracle primitives for local differential privacy.

Implements generalized randomized response (GRR) over a small categorical
domain and optimized local hashing (OLH) over bit-string domains, with
perturbation, support aggregation, unbiased count estimation, closed-form
variances, and an exhaustive privacy-ratio verifier.

Scalar entry points (grr_perturb, olh_perturb, olh_hash) define the
semantics; batch helpers (suffix ``_batch`` / ``_rows``) produce identical
results on arrays and are what the protocol layers call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .bitstrings import BitValue, rows_from_bitvalues
from .randomness import mix64

_LEN_SHIFT = 32
_POS_SHIFT = 16
_SEED_BOUND = 1 << 64


def _eps_value(eps) -> float:
    """Accept a float or a PrivacyBudget and return epsilon as a float."""
    if isinstance(eps, PrivacyBudget):
        return eps.epsilon
    value = float(eps)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"epsilon must be positive and finite, got {eps!r}")
    return value


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy budget epsilon, in nats."""

    epsilon: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")

    def split(self, parts: int) -> "PrivacyBudget":
        """Budget per report when sequentially composed over equal parts."""
        if parts < 1:
            raise ValueError(f"parts must be >= 1, got {parts}")
        return PrivacyBudget(self.epsilon / parts)


@dataclass(frozen=True)
class GrrParams:
    """Randomized-response parameters over a categorical domain of size d."""

    d: int
    p: float
    q: float

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"domain size must be >= 2, got {self.d}")
        if not 0 < self.q < self.p < 1:
            raise ValueError(f"need 0 < q < p < 1, got p={self.p}, q={self.q}")


def grr_params(d: int, eps) -> GrrParams:
    """Keep/flip probabilities for randomized response at budget eps."""
    epsilon = _eps_value(eps)
    if d < 2:
        raise ValueError(f"domain size must be >= 2, got {d}")
    e = math.exp(epsilon)
    p = e / (e + d - 1)
    q = (1.0 - p) / (d - 1)
    return GrrParams(d=d, p=p, q=q)


def grr_perturb(v: int, params: GrrParams, rng: np.random.Generator) -> int:
    """Report v with probability p, each other value with probability q."""
    v = int(v)
    if not 0 <= v < params.d:
        raise ValueError(f"value {v} outside domain [0, {params.d})")
    if rng.random() < params.p:
        return v
    other = int(rng.integers(params.d - 1))
    return other if other < v else other + 1


def grr_perturb_batch(
    values: np.ndarray, params: GrrParams, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized grr_perturb over an integer array."""
    values = np.asarray(values, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= params.d):
        raise ValueError(f"values outside domain [0, {params.d})")
    keep = rng.random(values.shape) < params.p
    other = rng.integers(0, params.d - 1, size=values.shape, dtype=np.int64)
    other += other >= values
    return np.where(keep, values, other)


def grr_estimate(reports, v: int, params: GrrParams) -> float:
    """Unbiased count estimate (I_v - n*q)/(p - q)."""
    arr = np.asarray(reports, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("reports must be a one-dimensional sequence")
    n = arr.size
    if n == 0:
        return 0.0
    if arr.min() < 0 or arr.max() >= params.d:
        raise ValueError(f"reports outside domain [0, {params.d})")
    if not 0 <= int(v) < params.d:
        raise ValueError(f"value {v} outside domain [0, {params.d})")
    support = int(np.count_nonzero(arr == int(v)))
    return (support - n * params.q) / (params.p - params.q)


def grr_variance(n: int, d: int, eps) -> float:
    """Estimator variance n*(d - 2 + e^eps)/(e^eps - 1)^2."""
    epsilon = _eps_value(eps)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if d < 2:
        raise ValueError(f"domain size must be >= 2, got {d}")
    e = math.exp(epsilon)
    return n * (d - 2 + e) / (e - 1.0) ** 2


@dataclass(frozen=True)
class OlhParams:
    """Hashed-domain parameters: d_prime buckets, keep probability p."""

    d_prime: int
    p: float
    q: float

    def __post_init__(self) -> None:
        if self.d_prime < 2:
            raise ValueError(f"bucket count must be >= 2, got {self.d_prime}")
        if not math.isclose(self.q, 1.0 / self.d_prime):
            raise ValueError("q must equal 1/d_prime")

    @property
    def grr(self) -> GrrParams:
        """The randomized-response step applied to the hashed bucket."""
        q = (1.0 - self.p) / (self.d_prime - 1)
        return GrrParams(d=self.d_prime, p=self.p, q=q)


def olh_params(eps) -> OlhParams:
    """Optimal hashed-domain size ceil(e^eps + 1) and its probabilities."""
    epsilon = _eps_value(eps)
    target = math.exp(epsilon) + 1.0
    nearest = round(target)
    d_prime = nearest if abs(target - nearest) < 1e-9 else math.ceil(target)
    if d_prime > _kernels.MAX_BUCKETS:
        raise ValueError(
            f"epsilon={epsilon} needs {d_prime} buckets, above the supported "
            f"maximum {_kernels.MAX_BUCKETS}"
        )
    e = math.exp(epsilon)
    p = e / (e + d_prime - 1)
    return OlhParams(d_prime=d_prime, p=p, q=1.0 / d_prime)


@dataclass(frozen=True)
class HashSeed:
    """Identifier of one member of the seeded hash family."""

    seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _SEED_BOUND:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class OlhReport:
    """One client report: the hash seed and the perturbed bucket."""

    seed: HashSeed
    y: int


@dataclass(frozen=True)
class SupportCounts:
    """Per-candidate support counts over n aggregated reports."""

    counts: dict[BitValue, int] = field(compare=False)
    n: int

    def __post_init__(self) -> None:
        for value, count in self.counts.items():
            if not 0 <= count <= self.n:
                raise ValueError(f"support {count} for {value} outside [0, {self.n}]")

    def support(self, v: BitValue) -> int:
        if v not in self.counts:
            raise KeyError(f"candidate {v} was not aggregated")
        return self.counts[v]


def _seed_int(seed) -> int:
    value = seed.seed if isinstance(seed, HashSeed) else int(seed)
    if not 0 <= value < _SEED_BOUND:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {value}")
    return value


def olh_hash(seed, v: BitValue, d_prime: int) -> int:
    """Deterministic bucket of v in {1..d_prime} under the given seed.

    Each byte of the packed value is mixed with the seed, the byte position,
    and the bit length; the per-byte residues are summed modulo d_prime.
    Distinct values therefore collide with probability 1/d_prime.
    """
    if d_prime < 2:
        raise ValueError(f"bucket count must be >= 2, got {d_prime}")
    s = _seed_int(seed)
    base = v.m << _LEN_SHIFT
    acc = 0
    for i, b in enumerate(v.key_bytes()):
        code = base | (i << _POS_SHIFT) | b
        acc = (acc + mix64(s ^ code) % d_prime) % d_prime
    return acc + 1


def olh_perturb(v: BitValue, eps, rng: np.random.Generator) -> OlhReport:
    """Draw a fresh seed, hash v, and randomize the bucket at budget eps."""
    params = olh_params(eps)
    seed = int(rng.integers(0, _SEED_BOUND, dtype=np.uint64))
    bucket = olh_hash(seed, v, params.d_prime) - 1
    y = grr_perturb(bucket, params.grr, rng)
    return OlhReport(seed=HashSeed(seed), y=y + 1)


def olh_perturb_batch(
    rows: np.ndarray, nbits: int, params: OlhParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Batch olh_perturb over packed byte rows.

    Returns (seeds, ys0) where ys0 holds 0-based buckets; add 1 for the
    wire format.
    """
    n = rows.shape[0]
    seeds = rng.integers(0, _SEED_BOUND, size=n, dtype=np.uint64)
    buckets = _kernels.hash_rows(seeds, np.ascontiguousarray(rows), nbits, params.d_prime)
    ys0 = grr_perturb_batch(buckets.astype(np.int64), params.grr, rng)
    return seeds, ys0.astype(np.uint8)


def olh_support_rows(
    seeds: np.ndarray,
    ys0: np.ndarray,
    cand_rows: np.ndarray,
    nbits: int,
    params: OlhParams,
) -> np.ndarray:
    """Support count of every candidate row over the given reports."""
    return _kernels.support_counts(seeds, ys0, cand_rows, nbits, params.d_prime)


def olh_aggregate(reports, candidates, eps) -> SupportCounts:
    """Count, per candidate, the reports whose seed hashes it to y."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    nbits = candidates[0].m
    if any(v.m != nbits for v in candidates):
        raise ValueError("candidates must share one bit length")
    params = olh_params(eps)
    n = len(reports)
    if n == 0:
        counts = {v: 0 for v in candidates}
        return SupportCounts(counts=counts, n=0)
    seeds = np.empty(n, dtype=np.uint64)
    ys0 = np.empty(n, dtype=np.uint8)
    for j, report in enumerate(reports):
        if not 1 <= report.y <= params.d_prime:
            raise ValueError(f"report bucket {report.y} outside 1..{params.d_prime}")
        seeds[j] = _seed_int(report.seed)
        ys0[j] = report.y - 1
    cand_rows = rows_from_bitvalues(candidates, nbits)
    supports = olh_support_rows(seeds, ys0, cand_rows, nbits, params)
    counts = {v: int(c) for v, c in zip(candidates, supports)}
    return SupportCounts(counts=counts, n=n)


def olh_estimate(supports: SupportCounts, v: BitValue, eps) -> float:
    """Unbiased count estimate (I_v - n/d')/(p - 1/d')."""
    params = olh_params(eps)
    support = supports.support(v)
    n = supports.n
    return (support - n / params.d_prime) / (params.p - 1.0 / params.d_prime)


def olh_estimate_batch(supports: np.ndarray, n: int, params: OlhParams) -> np.ndarray:
    """Vectorized olh_estimate over a support-count array."""
    supports = np.asarray(supports, dtype=np.float64)
    return (supports - n / params.d_prime) / (params.p - 1.0 / params.d_prime)


def olh_variance(n: int, eps) -> float:
    """Estimator variance n*4e^eps/(e^eps - 1)^2."""
    epsilon = _eps_value(eps)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    e = math.exp(epsilon)
    return n * 4.0 * e / (e - 1.0) ** 2


def _table_max_ratio(table: np.ndarray) -> float:
    """Max over outputs and value pairs of P[o|v1]/P[o|v2]."""
    ratio = 0.0
    d = table.shape[0]
    for v1 in range(d):
        for v2 in range(d):
            if v1 == v2:
                continue
            ratio = max(ratio, float(np.max(table[v1] / table[v2])))
    return ratio


def ldp_ratio(mechanism: str, eps, d: int, seeds=range(256)) -> float:
    """Worst-case output-probability ratio, from exhaustive tables.

    For "grr" the table is exact over the categorical domain [d].  For
    "olh" the ratio is computed per fixed seed (the seed itself is public)
    and maximized over the given seeds.
    """
    if d < 2 or d > 1024:
        raise ValueError(f"domain size must be in [2, 1024], got {d}")
    epsilon = _eps_value(eps)
    if mechanism == "grr":
        params = grr_params(d, epsilon)
        table = np.full((d, d), params.q)
        np.fill_diagonal(table, params.p)
        return _table_max_ratio(table)
    if mechanism == "olh":
        params = olh_params(epsilon)
        grr = params.grr
        m = max(1, (d - 1).bit_length())
        values = [BitValue(v, m) for v in range(d)]
        worst = 0.0
        for seed in seeds:
            buckets = np.array(
                [olh_hash(int(seed), v, params.d_prime) - 1 for v in values]
            )
            table = np.full((d, params.d_prime), grr.q)
            table[np.arange(d), buckets] = grr.p
            worst = max(worst, _table_max_ratio(table))
        return worst
    raise ValueError(f"unknown mechanism {mechanism!r}, expected 'grr' or 'olh'")
