"""Segment-based baseline protocols for heavy-hitter identification.

Two comparison protocols against the prefix-extension method.  The
segment-pairs protocol (SPM) splits each value into g segments; every user
reports the full value and one random segment pair, the server finds
frequent per-segment patterns, estimates pair frequencies jointly, and
assembles full candidates whose every segment pair is frequent.  The
multi-channel protocol (MCM) hashes each value into one of h channels;
users publish a vector with their own channel carrying one perturbed
segment and all other channels carrying uniform noise, and the server
reconstructs one candidate per channel segment by segment.

Both protocols support two ways to pay for the final full-value test:
splitting the privacy budget across phases, or partitioning users so each
phase gets a share of the population at the full budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from . import _kernels
from .bitstrings import BitValue, ints_to_matrix, order_rows, slice_matrix
from .freq_oracle import (
    HashSeed,
    OlhReport,
    olh_estimate_batch,
    olh_hash,
    olh_params,
    olh_perturb,
    olh_perturb_batch,
    olh_support_rows,
)
from .pem import RunResult, _dataset_rows
from .randomness import derive_seed, derive_seed_array, stream_uint64

_SEED_BOUND = 1 << 64


@dataclass(frozen=True)
class SpmConfig:
    """Segment-pairs protocol parameters.

    The m bits are cut into g segments of s = m/g bits.  With
    final_user_fraction = 0 every user sends three reports at eps/3 each;
    a positive fraction reserves that share of users for the full-value
    test at the whole budget, and the rest report their two segments at
    eps/2 each.
    """

    m: int
    g: int
    k: int
    eps: float
    final_user_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.g < 2:
            raise ValueError(f"segment count must be >= 2, got {self.g}")
        if self.m % self.g:
            raise ValueError(f"m={self.m} is not divisible by g={self.g}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.eps > 0:
            raise ValueError(f"epsilon must be positive, got {self.eps}")
        if not 0.0 <= self.final_user_fraction < 1.0:
            raise ValueError(
                f"final_user_fraction must be in [0, 1), got {self.final_user_fraction}"
            )

    @property
    def s(self) -> int:
        return self.m // self.g

    @property
    def variant(self) -> str:
        return "partition" if self.final_user_fraction > 0 else "split"

    def pair_count(self) -> int:
        return self.g * (self.g - 1) // 2

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "g": self.g,
            "s": self.s,
            "k": self.k,
            "eps": self.eps,
            "final_user_fraction": self.final_user_fraction,
        }


@dataclass(frozen=True)
class SpmReport:
    """One user's three messages: full value plus a canonical segment pair."""

    full: OlhReport | None
    alpha: int | None
    beta: int | None
    seg_a: OlhReport | None
    seg_b: OlhReport | None

    def __post_init__(self) -> None:
        if self.alpha is not None and self.beta is not None:
            if not 1 <= self.alpha < self.beta:
                raise ValueError(
                    f"segment pair must satisfy 1 <= alpha < beta, "
                    f"got ({self.alpha}, {self.beta})"
                )


@dataclass(frozen=True)
class McmConfig:
    """Multi-channel protocol parameters.

    h channels; each user reports one seg_len-bit segment on the channel
    its value hashes to, uniform noise on the rest.  Budget split: payload
    at eps2, full value at eps1.  Partition: both phases at eps1 + eps2.
    """

    m: int
    h: int
    seg_len: int
    eps1: float
    eps2: float
    final_user_fraction: float = 0.0
    channel_seed: int = 1

    def __post_init__(self) -> None:
        if self.h < 1:
            raise ValueError(f"channel count must be >= 1, got {self.h}")
        if self.seg_len < 1 or self.m % self.seg_len:
            raise ValueError(
                f"m={self.m} is not divisible by seg_len={self.seg_len}"
            )
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("both budget shares must be positive")
        if not 0.0 <= self.final_user_fraction < 1.0:
            raise ValueError(
                f"final_user_fraction must be in [0, 1), got {self.final_user_fraction}"
            )
        if not 0 <= self.channel_seed < _SEED_BOUND:
            raise ValueError("channel_seed must be a 64-bit unsigned integer")

    @property
    def eps_total(self) -> float:
        return self.eps1 + self.eps2

    @property
    def num_segments(self) -> int:
        return self.m // self.seg_len

    @property
    def variant(self) -> str:
        return "partition" if self.final_user_fraction > 0 else "split"

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "h": self.h,
            "seg_len": self.seg_len,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "final_user_fraction": self.final_user_fraction,
            "channel_seed": self.channel_seed,
        }


@dataclass(frozen=True)
class McmReport:
    """One user's message: optional full report, segment index, payloads."""

    full: OlhReport | None
    seg_index: int
    payloads: tuple[OlhReport, ...]


def spm_plan(m: int, k: int, query_limit: int, eps: float) -> SpmConfig:
    """Longest segments whose marginal and pair scans fit the query limit."""
    for s in range(m // 2, 0, -1):
        if m % s:
            continue
        g = m // s
        pairs = g * (g - 1) // 2
        if g * (1 << s) + pairs * k * k <= query_limit:
            return SpmConfig(m=m, g=g, k=k, eps=eps)
    raise ValueError(f"no segment length fits query_limit={query_limit} at m={m}, k={k}")


def mcm_plan(
    m: int, k: int, query_limit: int | None, eps: float, seg_len: int | None = None
) -> McmConfig:
    """Channel count ceil(k^1.5) with the longest fitting segment length.

    Takes (m, k, query_limit, eps) in the same order as the other
    planners; query_limit may be None, capping segments at 8 bits.
    """
    h = math.ceil(k**1.5)
    if seg_len is None:
        for s in range(min(m, 16), 0, -1):
            if m % s:
                continue
            if query_limit is None and s > 8:
                continue
            if query_limit is not None and h * (m // s) * (1 << s) > query_limit:
                continue
            seg_len = s
            break
        if seg_len is None:
            raise ValueError(
                f"no segment length fits query_limit={query_limit} at m={m}, k={k}"
            )
    return McmConfig(m=m, h=h, seg_len=seg_len, eps1=eps / 2, eps2=eps / 2)


def partition_users_variant(cfg, fraction: float):
    """The same protocol with users partitioned instead of budget split."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if not isinstance(cfg, (SpmConfig, McmConfig)):
        raise TypeError(f"expected SpmConfig or McmConfig, got {type(cfg).__name__}")
    return replace(cfg, final_user_fraction=fraction)


@dataclass(frozen=True)
class JointEstimateInput:
    """Inputs of the two-pattern joint count estimator."""

    I_ab: float
    n: int
    n_a_est: float
    n_b_est: float
    p: float
    q: float

    def __post_init__(self) -> None:
        if self.I_ab > self.n:
            raise ValueError(f"support {self.I_ab} exceeds group size {self.n}")
        if self.p == self.q:
            raise ValueError("p = q leaves the oracle degenerate")


def joint_estimate(inp: JointEstimateInput) -> float:
    """Unbiased count of users matching both patterns of a pair.

    Inverts E[I_ab] = n_ab (p-q)^2 + (n_a + n_b) q (p-q) + n q^2, which
    holds because the two reports use independent hash seeds.
    """
    pq = inp.p - inp.q
    return (inp.I_ab - (inp.n_a_est + inp.n_b_est) * inp.q * pq - inp.n * inp.q**2) / pq**2


def joint_estimate_multi(I_V, marginals, n: int, p: float, q: float) -> float:
    """Joint count estimator for a tuple of patterns of any size.

    marginals[i] must list the estimated joint counts of every subset of
    size i+1 of the pattern tuple, for sizes 1 .. |V|-1; the empty subset
    contributes n.  Inverts E[I_V] = sum_i S_i q^(|V|-i) (p-q)^i with S_i
    the sum of true size-i joint counts (S_0 = n, S_|V| the target).
    """
    if p == q:
        raise ValueError("p = q leaves the oracle degenerate")
    size = len(marginals) + 1
    sums = [float(n)]
    for level, estimates in enumerate(marginals, start=1):
        expected = math.comb(size, level)
        if len(estimates) != expected:
            raise ValueError(
                f"size-{level} subsets need {expected} marginals, got {len(estimates)}"
            )
        sums.append(float(sum(estimates)))
    total = float(I_V)
    pq = p - q
    for i in range(size):
        total -= sums[i] * q ** (size - i) * pq**i
    return total / pq**size


def spm_client_report(
    v: BitValue, cfg: SpmConfig, rng: np.random.Generator, holdout: bool = False
) -> SpmReport:
    """One user's SPM messages; holdout users send only the full report."""
    if v.m != cfg.m:
        raise ValueError(f"value has {v.m} bits, config expects {cfg.m}")
    if holdout and cfg.variant != "partition":
        raise ValueError("holdout reports exist only in the partition variant")
    if holdout:
        return SpmReport(
            full=olh_perturb(v, cfg.eps, rng),
            alpha=None,
            beta=None,
            seg_a=None,
            seg_b=None,
        )
    pair_table = list(combinations(range(1, cfg.g + 1), 2))
    alpha, beta = pair_table[int(rng.integers(len(pair_table)))]
    s = cfg.s
    seg = lambda i: BitValue((v.bits >> (cfg.m - i * s)) & ((1 << s) - 1), s)
    if cfg.variant == "partition":
        eps_full, eps_seg = None, cfg.eps / 2
        full = None
    else:
        eps_full = eps_seg = cfg.eps / 3
        full = olh_perturb(v, eps_full, rng)
    return SpmReport(
        full=full,
        alpha=alpha,
        beta=beta,
        seg_a=olh_perturb(seg(alpha), eps_seg, rng),
        seg_b=olh_perturb(seg(beta), eps_seg, rng),
    )


def mcm_client_report(
    v: BitValue, cfg: McmConfig, rng: np.random.Generator, holdout: bool = False
) -> McmReport:
    """One user's MCM message; holdout users send only the full report."""
    if v.m != cfg.m:
        raise ValueError(f"value has {v.m} bits, config expects {cfg.m}")
    if holdout and cfg.variant != "partition":
        raise ValueError("holdout reports exist only in the partition variant")
    if holdout:
        return McmReport(
            full=olh_perturb(v, cfg.eps_total, rng), seg_index=0, payloads=()
        )
    eps_payload = cfg.eps_total if cfg.variant == "partition" else cfg.eps2
    params = olh_params(eps_payload)
    own = olh_hash(cfg.channel_seed, v, cfg.h) - 1
    seg_index = int(rng.integers(cfg.num_segments)) + 1
    s = cfg.seg_len
    shift = cfg.m - seg_index * s
    segment = BitValue((v.bits >> shift) & ((1 << s) - 1), s)
    payloads = []
    for c in range(cfg.h):
        if c == own:
            payloads.append(olh_perturb(segment, eps_payload, rng))
        else:
            payloads.append(
                OlhReport(
                    seed=HashSeed(int(rng.integers(0, _SEED_BOUND, dtype=np.uint64))),
                    y=int(rng.integers(params.d_prime)) + 1,
                )
            )
    full = None
    if cfg.variant == "split":
        full = olh_perturb(v, cfg.eps1, rng)
    return McmReport(full=full, seg_index=seg_index, payloads=tuple(payloads))


def _holdout_mask(master_seed: int, label: str, n: int, fraction: float) -> np.ndarray:
    draws = derive_seed_array(master_seed, label, n)
    uniforms = (draws >> np.uint64(11)).astype(np.float64) * 2.0**-53
    mask = uniforms < fraction
    if not mask.any() or mask.all():
        raise ValueError(
            f"partition fraction {fraction} leaves an empty phase at n={n}"
        )
    return mask


def _segment_matrices(rows: np.ndarray, m: int, s: int) -> list[np.ndarray]:
    return [slice_matrix(rows, m, i * s, s) for i in range(m // s)]


def _gather_segments(
    segments: list[np.ndarray], picks: np.ndarray
) -> np.ndarray:
    """Row u of the result is segments[picks[u]][u]."""
    n = picks.shape[0]
    out = np.empty((n, segments[0].shape[1]), dtype=np.uint8)
    for i, seg in enumerate(segments):
        mask = picks == i
        if mask.any():
            out[mask] = seg[mask]
    return out


def _top_patterns(
    supports: np.ndarray, n_reports: int, params, keep: int, s: int
) -> np.ndarray:
    """Pattern ints of the top estimates, ties by pattern ascending."""
    estimates = olh_estimate_batch(supports, n_reports, params)
    pattern_rows = ints_to_matrix(np.arange(supports.shape[0], dtype=np.uint64), s)
    order = order_rows(pattern_rows, estimates)
    return order[: min(keep, order.shape[0])].astype(np.int64)


def _pair_supports(
    seeds_a, ys_a, cand_a: np.ndarray, seeds_b, ys_b, cand_b: np.ndarray, s: int, d_prime: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Joint and marginal support counts of candidate patterns in one group."""
    rows_a = ints_to_matrix(cand_a.astype(np.uint64), s)
    rows_b = ints_to_matrix(cand_b.astype(np.uint64), s)
    A = _kernels.support_matrix(seeds_a, ys_a, rows_a, s, d_prime)
    B = _kernels.support_matrix(seeds_b, ys_b, rows_b, s, d_prime)
    joint = A.T.astype(np.float32) @ B.astype(np.float32)
    return (
        np.rint(joint).astype(np.int64),
        A.sum(axis=0).astype(np.int64),
        B.sum(axis=0).astype(np.int64),
    )


def _assemble(cand_ints: list[np.ndarray], pairsets: dict, g: int, cap: int) -> list[tuple]:
    """Tuples (one pattern per segment) whose every pair is frequent."""
    partial: list[tuple] = [(int(x),) for x in cand_ints[0]]
    for t in range(1, g):
        grown = []
        for pa in partial:
            for x in cand_ints[t]:
                x = int(x)
                if all((pa[i], x) in pairsets[(i, t)] for i in range(t)):
                    grown.append(pa + (x,))
                    if len(grown) > cap:
                        return grown
        partial = grown
        if not partial:
            return []
    return partial


def spm_run(dataset, cfg: SpmConfig, k: int | None = None, master_seed: int = 0) -> RunResult:
    """Full segment-pairs protocol run."""
    if k is None:
        k = cfg.k
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rows = _dataset_rows(dataset, cfg.m)
    n = rows.shape[0]
    g, s, m = cfg.g, cfg.s, cfg.m
    pair_table = list(combinations(range(g), 2))
    pair_index = {pair: idx for idx, pair in enumerate(pair_table)}

    if cfg.variant == "partition":
        hold = _holdout_mask(master_seed, "spm.holdout", n, cfg.final_user_fraction)
        seg_users = np.flatnonzero(~hold)
        full_users = np.flatnonzero(hold)
        eps_seg = cfg.eps / 2
        eps_full = cfg.eps
    else:
        seg_users = np.arange(n)
        full_users = np.arange(n)
        eps_seg = cfg.eps / 3
        eps_full = cfg.eps / 3
    params_seg = olh_params(eps_seg)
    params_full = olh_params(eps_full)

    # Segment-pair phase: each reporting user perturbs two segments.
    pair_draw = derive_seed_array(master_seed, "spm.pair", n) % np.uint64(len(pair_table))
    pair_of_user = pair_draw.astype(np.int64)[seg_users]
    alphas = np.array([pair_table[i][0] for i in range(len(pair_table))])[pair_of_user]
    betas = np.array([pair_table[i][1] for i in range(len(pair_table))])[pair_of_user]
    segments = _segment_matrices(rows[seg_users], m, s)
    rows_a = _gather_segments(segments, alphas)
    rows_b = _gather_segments(segments, betas)
    rng_a = np.random.default_rng(derive_seed(master_seed, "spm.segA"))
    rng_b = np.random.default_rng(derive_seed(master_seed, "spm.segB"))
    seeds_a, ys_a = olh_perturb_batch(rows_a, s, params_seg, rng_a)
    seeds_b, ys_b = olh_perturb_batch(rows_b, s, params_seg, rng_b)

    # Per-segment marginal candidates over all 2^s patterns.
    pattern_rows = ints_to_matrix(np.arange(1 << s, dtype=np.uint64), s)
    queries = 0
    cand_ints: list[np.ndarray] = []
    for seg in range(g):
        in_a = alphas == seg
        in_b = betas == seg
        supports = olh_support_rows(
            seeds_a[in_a], ys_a[in_a], pattern_rows, s, params_seg
        ) + olh_support_rows(seeds_b[in_b], ys_b[in_b], pattern_rows, s, params_seg)
        n_reports = int(in_a.sum() + in_b.sum())
        queries += 1 << s
        cand_ints.append(_top_patterns(supports, n_reports, params_seg, k, s))

    # Pair groups: joint estimates over candidate cross products.
    entries = []  # (estimate, group, a_int, b_int)
    pairsets_full: dict[tuple, set] = {pair: set() for pair in pair_table}
    for idx, (i, j) in enumerate(pair_table):
        members = pair_of_user == idx
        n_ij = int(members.sum())
        joint_counts, sup_a, sup_b = _pair_supports(
            seeds_a[members], ys_a[members], cand_ints[i],
            seeds_b[members], ys_b[members], cand_ints[j],
            s, params_seg.d_prime,
        )
        queries += cand_ints[i].shape[0] * cand_ints[j].shape[0]
        est_a = olh_estimate_batch(sup_a, n_ij, params_seg)
        est_b = olh_estimate_batch(sup_b, n_ij, params_seg)
        q = params_seg.q
        pq = params_seg.p - q
        joint_est = (
            joint_counts - (est_a[:, None] + est_b[None, :]) * q * pq - n_ij * q * q
        ) / pq**2
        for ai, a_val in enumerate(cand_ints[i]):
            for bi, b_val in enumerate(cand_ints[j]):
                entries.append((float(joint_est[ai, bi]), idx, int(a_val), int(b_val)))
    # Joint estimate descending; ties in lexicographic (group, a, b) order.
    entries.sort(key=lambda e: (-e[0], e[1], e[2], e[3]))

    # Add pairs in that order until the assembly exceeds k candidates.
    def joined(t: int) -> list[tuple]:
        sets: dict[tuple, set] = {pair: set() for pair in pair_table}
        for est, idx, a_val, b_val in entries[:t]:
            sets[pair_table[idx]].add((a_val, b_val))
        return _assemble(cand_ints, sets, g, cap=max(16 * k, 256))

    lo, hi = 0, len(entries)
    assembled = joined(hi)
    if len(assembled) > k:
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if len(joined(mid)) > k:
                hi = mid
            else:
                lo = mid
        assembled = joined(hi)

    # Final test: full-value estimates over the assembled candidates.
    identified: tuple = ()
    if assembled:
        shifts = [m - (t + 1) * s for t in range(g)]
        values = [sum(x << sh for x, sh in zip(tup, shifts)) for tup in assembled]
        cand_rows = ints_to_matrix(np.array(values, dtype=np.uint64), m)
        rng_full = np.random.default_rng(derive_seed(master_seed, "spm.full"))
        seeds_f, ys_f = olh_perturb_batch(rows[full_users], m, params_full, rng_full)
        supports = olh_support_rows(seeds_f, ys_f, cand_rows, m, params_full)
        estimates = olh_estimate_batch(supports, full_users.size, params_full)
        queries += cand_rows.shape[0]
        scale = n / full_users.size
        order = order_rows(cand_rows, estimates)[: min(k, len(values))]
        identified = tuple(
            (BitValue(values[i], m), float(estimates[i] * scale)) for i in order
        )
    return RunResult(
        protocol="spm",
        config=cfg.to_dict(),
        seed=master_seed,
        identified=identified,
        queries_used=queries,
        variant=cfg.variant,
    )


def mcm_run(dataset, cfg: McmConfig, k: int, master_seed: int = 0) -> RunResult:
    """Full multi-channel protocol run."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rows = _dataset_rows(dataset, cfg.m)
    n = rows.shape[0]
    m, s, h = cfg.m, cfg.seg_len, cfg.h
    num_segs = cfg.num_segments

    if cfg.variant == "partition":
        hold = _holdout_mask(master_seed, "mcm.holdout", n, cfg.final_user_fraction)
        payload_users = np.flatnonzero(~hold)
        full_users = np.flatnonzero(hold)
        eps_payload = cfg.eps_total
        eps_full = cfg.eps_total
    else:
        payload_users = np.arange(n)
        full_users = np.arange(n)
        eps_payload = cfg.eps2
        eps_full = cfg.eps1
    params_payload = olh_params(eps_payload)
    params_full = olh_params(eps_full)
    d_prime = params_payload.d_prime

    # Client payloads: own channel carries the chosen segment, rest noise.
    np_users = payload_users.size
    chan_seeds = np.full(np_users, cfg.channel_seed, dtype=np.uint64)
    own_channel = _kernels.hash_rows(chan_seeds, rows[payload_users], m, h).astype(np.int64)
    seg_pick = (
        derive_seed_array(master_seed, "mcm.seg", n) % np.uint64(num_segs)
    ).astype(np.int64)[payload_users]
    segments = _segment_matrices(rows[payload_users], m, s)
    own_rows = _gather_segments(segments, seg_pick)
    rng_payload = np.random.default_rng(derive_seed(master_seed, "mcm.payload"))
    seeds_own, ys_own = olh_perturb_batch(own_rows, s, params_payload, rng_payload)
    seeds_all = stream_uint64(master_seed, "mcm.noise.seed", np_users * h).reshape(
        np_users, h
    )
    ys_all = (
        stream_uint64(master_seed, "mcm.noise.y", np_users * h) % np.uint64(d_prime)
    ).astype(np.uint8).reshape(np_users, h)
    user_idx = np.arange(np_users)
    seeds_all[user_idx, own_channel] = seeds_own
    ys_all[user_idx, own_channel] = ys_own

    # Per channel and segment position, pick the winning pattern.
    pattern_rows = ints_to_matrix(np.arange(1 << s, dtype=np.uint64), s)
    queries = 0
    winners = np.zeros((h, num_segs), dtype=np.int64)
    for t in range(num_segs):
        members = np.flatnonzero(seg_pick == t)
        n_t = members.size
        baseline = n_t / d_prime
        for c in range(h):
            supports = _kernels.support_counts(
                np.ascontiguousarray(seeds_all[members, c]),
                np.ascontiguousarray(ys_all[members, c]),
                pattern_rows,
                s,
                d_prime,
            )
            scores = supports.astype(np.float64) - baseline
            queries += 1 << s
            winners[c, t] = int(order_rows(pattern_rows, scores)[0])

    # One candidate per channel; deduplicate, keep channel order.
    shifts = [m - (t + 1) * s for t in range(num_segs)]
    channel_values = [
        sum(int(winners[c, t]) << shifts[t] for t in range(num_segs)) for c in range(h)
    ]
    values = list(dict.fromkeys(channel_values))

    # Final test: full-value estimates over the channel candidates.
    cand_rows = ints_to_matrix(np.array(values, dtype=np.uint64), m)
    rng_full = np.random.default_rng(derive_seed(master_seed, "mcm.full"))
    seeds_f, ys_f = olh_perturb_batch(rows[full_users], m, params_full, rng_full)
    supports = olh_support_rows(seeds_f, ys_f, cand_rows, m, params_full)
    estimates = olh_estimate_batch(supports, full_users.size, params_full)
    queries += cand_rows.shape[0]
    scale = n / full_users.size
    order = order_rows(cand_rows, estimates)[: min(k, len(values))]
    identified = tuple(
        (BitValue(values[i], m), float(estimates[i] * scale)) for i in order
    )
    return RunResult(
        protocol="mcm",
        config=cfg.to_dict(),
        seed=master_seed,
        identified=identified,
        queries_used=queries,
        variant=cfg.variant,
    )
