"""Iterative prefix-extension protocol for heavy-hitter identification.

Users are split into g groups; group i reports a perturbed prefix of its
value, gamma + eta*i bits long.  The server identifies the most frequent
prefixes in round i, extends each survivor by eta bits to form the next
candidate domain, and finishes with the full-length candidates of the last
round.  Both a top-k and a frequency-threshold variant are provided.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bitstrings import (
    BitValue,
    extend_matrix,
    ints_to_matrix,
    matrix_to_ints,
    num_bytes,
    order_rows,
    prefix_matrix,
    rows_from_bitvalues,
)
from .datagen import Dataset
from .freq_oracle import (
    OlhReport,
    olh_aggregate,
    olh_estimate_batch,
    olh_params,
    olh_perturb,
    olh_perturb_batch,
    olh_support_rows,
)
from .randomness import derive_seed, derive_seed_array, mix64_array

_GROUP_LABEL = "pem.group"
_ROUND_LABEL = "pem.round"


@dataclass(frozen=True)
class PemConfig:
    """Prefix-extension parameters.

    gamma initial prefix bits, eta extension bits per round, g rounds.
    Optional per-round overrides: etas (extension widths), cand_sizes
    (candidates kept per round), group_fracs (user share per round).
    """

    m: int
    gamma: int
    eta: int
    g: int
    k: int
    eps: float
    query_limit: int | None = None
    cand_size: int | None = None
    etas: tuple[int, ...] | None = None
    cand_sizes: tuple[int, ...] | None = None
    group_fracs: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"bit length must be >= 1, got {self.m}")
        if not 0 <= self.gamma < self.m:
            raise ValueError(f"need 0 <= gamma < m, got gamma={self.gamma}, m={self.m}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.eps > 0:
            raise ValueError(f"epsilon must be positive, got {self.eps}")
        if self.etas is None:
            if self.eta < 1:
                raise ValueError(f"eta must be >= 1, got {self.eta}")
            expected_g = math.ceil((self.m - self.gamma) / self.eta)
            if self.g != expected_g:
                raise ValueError(
                    f"g must equal ceil((m-gamma)/eta) = {expected_g}, got {self.g}"
                )
        else:
            if len(self.etas) != self.g:
                raise ValueError(f"etas has {len(self.etas)} entries, g={self.g}")
            if any(e < 1 for e in self.etas):
                raise ValueError("per-round extensions must be >= 1")
        lengths = self.prefix_lengths()
        if lengths[-1] != self.m:
            raise ValueError(
                f"rounds reach only {lengths[-1]} of {self.m} bits; g or etas too small"
            )
        if len(set(lengths)) != len(lengths):
            raise ValueError("every round must extend the prefix by at least one bit")
        if self.cand_size is not None and self.cand_size < 1:
            raise ValueError(f"cand_size must be >= 1, got {self.cand_size}")
        if self.cand_sizes is not None:
            if len(self.cand_sizes) != self.g:
                raise ValueError(f"cand_sizes has {len(self.cand_sizes)} entries, g={self.g}")
            if any(c < 1 for c in self.cand_sizes):
                raise ValueError("per-round candidate sizes must be >= 1")
        if self.group_fracs is not None:
            if len(self.group_fracs) != self.g:
                raise ValueError(f"group_fracs has {len(self.group_fracs)} entries, g={self.g}")
            if any(f <= 0 for f in self.group_fracs):
                raise ValueError("group fractions must be positive")
            if abs(sum(self.group_fracs) - 1.0) > 1e-9:
                raise ValueError("group fractions must sum to 1")
        if self.query_limit is not None and self.total_queries() > self.query_limit:
            raise ValueError(
                f"plan needs {self.total_queries()} queries, limit {self.query_limit}"
            )

    def round_etas(self) -> tuple[int, ...]:
        """Extension bits per round; the last round is clipped to m."""
        if self.etas is not None:
            etas = []
            length = self.gamma
            for e in self.etas:
                step = min(e, self.m - length)
                etas.append(step)
                length += step
            return tuple(etas)
        etas = []
        length = self.gamma
        for _ in range(self.g):
            step = min(self.eta, self.m - length)
            etas.append(step)
            length += step
        return tuple(etas)

    def prefix_lengths(self) -> tuple[int, ...]:
        lengths = []
        length = self.gamma
        for e in self.round_etas():
            length += e
            lengths.append(length)
        return tuple(lengths)

    def round_cand_sizes(self) -> tuple[int, ...]:
        if self.cand_sizes is not None:
            return self.cand_sizes
        return (self.cand_size if self.cand_size is not None else self.k,) * self.g

    def round_group_fracs(self) -> tuple[float, ...]:
        if self.group_fracs is not None:
            return self.group_fracs
        return (1.0 / self.g,) * self.g

    def round_domain_sizes(self) -> tuple[int, ...]:
        """Candidate-domain size per round: |C_{i-1}| * 2^eta_i."""
        sizes = []
        prev = 1 << self.gamma
        for e, c in zip(self.round_etas(), self.round_cand_sizes()):
            domain = prev * (1 << e)
            sizes.append(domain)
            prev = min(c, domain)
        return tuple(sizes)

    def total_queries(self) -> int:
        return sum(self.round_domain_sizes())

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "gamma": self.gamma,
            "eta": self.eta,
            "g": self.g,
            "k": self.k,
            "eps": self.eps,
            "query_limit": self.query_limit,
        }


@dataclass(frozen=True)
class RoundPlan:
    """Resolved shape of one protocol round."""

    index: int
    prefix_len: int
    ext_bits: int
    cand_size: int
    domain_size: int
    group_frac: float


def round_plans(cfg: PemConfig) -> tuple[RoundPlan, ...]:
    """Expand a config into one RoundPlan per round."""
    plans = []
    for i, (length, ext, cand, domain, frac) in enumerate(
        zip(
            cfg.prefix_lengths(),
            cfg.round_etas(),
            cfg.round_cand_sizes(),
            cfg.round_domain_sizes(),
            cfg.round_group_fracs(),
        ),
        start=1,
    ):
        plans.append(
            RoundPlan(
                index=i,
                prefix_len=length,
                ext_bits=ext,
                cand_size=cand,
                domain_size=domain,
                group_frac=frac,
            )
        )
    return tuple(plans)


def plan(m: int, k: int, query_limit: int, eps: float) -> PemConfig:
    """Widest per-round extension that keeps total queries within the limit.

    gamma = ceil(log2 k); eta is the largest integer such that
    2^(gamma+eta) * ceil((m-gamma)/eta) <= query_limit.
    """
    if m < 1 or k < 1 or query_limit < 1:
        raise ValueError("m, k, and query_limit must be positive")
    gamma = max((k - 1).bit_length(), 0)
    if gamma >= m:
        raise ValueError(f"k={k} needs {gamma} prefix bits but values have only {m}")
    best = None
    for eta in range(1, m - gamma + 1):
        g = math.ceil((m - gamma) / eta)
        if (1 << (gamma + eta)) * g <= query_limit:
            best = eta
    if best is None:
        raise ValueError(
            f"no extension width fits query_limit={query_limit} at m={m}, k={k}"
        )
    g = math.ceil((m - gamma) / best)
    return PemConfig(
        m=m, gamma=gamma, eta=best, g=g, k=k, eps=eps, query_limit=query_limit
    )


def assign_group(user_index: int, n: int, g: int, master_seed: int) -> int:
    """Uniform group in {1..g}, stable in (master_seed, user_index)."""
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    if not 0 <= user_index < n:
        raise ValueError(f"user_index {user_index} outside [0, {n})")
    return derive_seed(master_seed, _GROUP_LABEL, user_index) % g + 1


def assign_groups(n: int, g: int, master_seed: int, fracs=None) -> np.ndarray:
    """Vectorized group assignment (0-based array of length n).

    With uniform shares this matches assign_group exactly; explicit
    fractions switch to inverse-CDF sampling on the same per-user draws.
    """
    draws = derive_seed_array(master_seed, _GROUP_LABEL, n)
    if fracs is None:
        return (draws % np.uint64(g)).astype(np.int64)
    fracs = np.asarray(fracs, dtype=np.float64)
    if fracs.shape != (g,):
        raise ValueError(f"fracs must have length {g}")
    uniforms = (draws >> np.uint64(11)).astype(np.float64) * 2.0**-53
    edges = np.cumsum(fracs)[:-1]
    return np.searchsorted(edges, uniforms, side="right").astype(np.int64)


@dataclass(frozen=True)
class PemReport:
    """One client message: group index and the perturbed prefix report."""

    group: int
    inner: OlhReport


@dataclass(frozen=True)
class CandidateSet:
    """Ranked surviving prefixes of one round."""

    round: int
    prefixes: tuple[BitValue, ...]
    estimates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.prefixes) != len(self.estimates):
            raise ValueError("prefixes and estimates must have equal length")
        if len(set(self.prefixes)) != len(self.prefixes):
            raise ValueError("candidate prefixes must be distinct")
        lengths = {v.m for v in self.prefixes}
        if len(lengths) > 1:
            raise ValueError("candidate prefixes must share one length")
        order = sorted(
            range(len(self.prefixes)),
            key=lambda i: (-self.estimates[i], self.prefixes[i].bits),
        )
        if order != list(range(len(order))):
            raise ValueError("candidates must be ordered by estimate desc, value asc")


def client_report(
    v: BitValue, group: int, cfg: PemConfig, rng: np.random.Generator
) -> PemReport:
    """Perturbed report of the group's prefix of v, at the full budget."""
    if not 1 <= group <= cfg.g:
        raise ValueError(f"group {group} outside 1..{cfg.g}")
    if v.m != cfg.m:
        raise ValueError(f"value has {v.m} bits, config expects {cfg.m}")
    length = cfg.prefix_lengths()[group - 1]
    return PemReport(group=group, inner=olh_perturb(v.prefix(length), cfg.eps, rng))


def extend_candidates(prev: CandidateSet, eta: int, m: int) -> list[BitValue]:
    """Every candidate extended by every pattern of min(eta, m - len) bits."""
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    if not prev.prefixes:
        return []
    length = prev.prefixes[0].m
    if length >= m:
        raise ValueError(f"prefixes already have {length} of {m} bits")
    ext = min(eta, m - length)
    return [
        p.extend(suffix, ext) for p in prev.prefixes for suffix in range(1 << ext)
    ]


def _top_order(estimates: np.ndarray, rows: np.ndarray, keep: int) -> np.ndarray:
    """Indices of the top rows by (estimate desc, value asc)."""
    order = order_rows(rows, estimates)
    return order[: min(keep, len(order))]


def identify_round(
    reports, domain, cand_size: int, eps: float, round_index: int = 0
) -> CandidateSet:
    """Aggregate one group's reports and keep the top candidates."""
    domain = list(domain)
    if not domain:
        raise ValueError("domain must be non-empty")
    if cand_size < 1:
        raise ValueError(f"cand_size must be >= 1, got {cand_size}")
    inner = [r.inner if isinstance(r, PemReport) else r for r in reports]
    supports = olh_aggregate(inner, domain, eps)
    params = olh_params(eps)
    counts = np.array([supports.counts[v] for v in domain], dtype=np.float64)
    estimates = olh_estimate_batch(counts, supports.n, params)
    rows = rows_from_bitvalues(domain, domain[0].m)
    top = _top_order(estimates, rows, cand_size)
    return CandidateSet(
        round=round_index,
        prefixes=tuple(domain[i] for i in top),
        estimates=tuple(float(estimates[i]) for i in top),
    )


@dataclass(frozen=True)
class RunResult:
    """Outcome of one protocol run."""

    protocol: str
    config: dict
    seed: int
    identified: tuple[tuple[BitValue, float], ...]
    queries_used: int
    variant: str = "split"
    metrics: dict = field(default_factory=dict)
    audit: tuple[CandidateSet, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        doc = {
            "protocol": self.protocol,
            "config": self.config,
            "seed": self.seed,
            "identified": [
                {"value_hex": v.to_hex(), "estimate": e} for v, e in self.identified
            ],
            "metrics": {
                "f1": self.metrics.get("f1"),
                "ncr": self.metrics.get("ncr"),
                "var": self.metrics.get("var"),
            },
            "queries_used": self.queries_used,
        }
        if self.protocol != "pem":
            doc["variant"] = self.variant
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def values(self) -> list[BitValue]:
        return [v for v, _ in self.identified]


def _dataset_rows(dataset, m: int) -> np.ndarray:
    if isinstance(dataset, Dataset):
        if dataset.m != m:
            raise ValueError(f"dataset has {dataset.m}-bit values, config expects {m}")
        return dataset.rows
    values = list(dataset)
    return rows_from_bitvalues(values, m)


def _run_rounds(
    rows: np.ndarray, cfg: PemConfig, master_seed: int
) -> tuple[list[CandidateSet], np.ndarray, np.ndarray, int, int]:
    """Execute all rounds; returns (audit, final rows, final estimates,
    final group size, queries used)."""
    n = rows.shape[0]
    params = olh_params(cfg.eps)
    fracs = cfg.round_group_fracs()
    uniform = cfg.group_fracs is None
    groups = assign_groups(n, cfg.g, master_seed, fracs=None if uniform else fracs)
    plans = round_plans(cfg)
    audit: list[CandidateSet] = []
    queries = 0
    cand_rows = None
    estimates = None
    group_n = 0
    for plan_i in plans:
        i = plan_i.index
        length = plan_i.prefix_len
        if i == 1:
            first_len = length
            domain = ints_to_matrix(
                np.arange(1 << first_len, dtype=np.uint64), first_len
            )
        else:
            prev_len = plans[i - 2].prefix_len
            domain = extend_matrix(cand_rows, prev_len, plan_i.ext_bits)
        member = np.flatnonzero(groups == (i - 1))
        group_n = member.size
        rng = np.random.default_rng(derive_seed(master_seed, _ROUND_LABEL, i))
        if group_n:
            prefixes = prefix_matrix(rows[member], length)
            seeds, ys0 = olh_perturb_batch(prefixes, length, params, rng)
            supports = olh_support_rows(seeds, ys0, domain, length, params)
        else:
            supports = np.zeros(domain.shape[0], dtype=np.int64)
        ests = olh_estimate_batch(supports, group_n, params)
        queries += domain.shape[0]
        top = _top_order(ests, domain, plan_i.cand_size)
        cand_rows = np.ascontiguousarray(domain[top])
        estimates = ests[top]
        ints = matrix_to_ints(cand_rows, length)
        audit.append(
            CandidateSet(
                round=i,
                prefixes=tuple(BitValue(v, length) for v in ints),
                estimates=tuple(float(e) for e in estimates),
            )
        )
    return audit, cand_rows, estimates, group_n, queries


def _scaled_pairs(
    cand_rows: np.ndarray,
    estimates: np.ndarray,
    m: int,
    n: int,
    group_n: int,
    keep: int,
) -> list[tuple[BitValue, float]]:
    """Top candidates with estimates scaled from the final group to n users."""
    scale = n / group_n if group_n else float("nan")
    ints = matrix_to_ints(cand_rows[:keep], m)
    return [
        (BitValue(v, m), float(e * scale)) for v, e in zip(ints, estimates[:keep])
    ]


def run_topk(dataset, cfg: PemConfig, master_seed: int) -> RunResult:
    """Full protocol run returning the k best full-length values."""
    rows = _dataset_rows(dataset, cfg.m)
    audit, cand_rows, estimates, group_n, queries = _run_rounds(rows, cfg, master_seed)
    identified = _scaled_pairs(
        cand_rows, estimates, cfg.m, rows.shape[0], group_n, cfg.k
    )
    return RunResult(
        protocol="pem",
        config=cfg.to_dict(),
        seed=master_seed,
        identified=tuple(identified),
        queries_used=queries,
        audit=tuple(audit),
    )


def run_threshold(
    dataset, cfg: PemConfig, theta: float, master_seed: int
) -> RunResult:
    """Keep candidates whose estimated frequency exceeds theta.

    Intermediate rounds track ceil(1/theta) candidates (no more than the
    configured size), since at most that many values can exceed theta.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    k_eff = math.ceil(1.0 / theta)
    capped = tuple(min(k_eff, c) for c in cfg.round_cand_sizes())
    cfg_eff = replace(cfg, cand_sizes=capped, cand_size=None)
    rows = _dataset_rows(dataset, cfg.m)
    n = rows.shape[0]
    audit, cand_rows, estimates, group_n, queries = _run_rounds(
        rows, cfg_eff, master_seed
    )
    pairs = _scaled_pairs(cand_rows, estimates, cfg.m, n, group_n, len(estimates))
    identified = [(v, e) for v, e in pairs if e / n > theta]
    return RunResult(
        protocol="pem",
        config={**cfg.to_dict(), "theta": theta},
        seed=master_seed,
        identified=tuple(identified),
        queries_used=queries,
        audit=tuple(audit),
    )


def check_prefix_consistency(result: RunResult) -> bool:
    """Every identified value's per-round prefix survived that round."""
    survivors = [(c.prefixes[0].m, set(c.prefixes)) for c in result.audit if c.prefixes]
    for v, _ in result.identified:
        for length, kept in survivors:
            if v.prefix(length) not in kept:
                return False
    return True


def write_reports(path, reports) -> None:
    """Write PemReports as CSV lines `group,seed,y` with a header."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as out:
        out.write("group,seed,y\n")
        for r in reports:
            out.write(f"{r.group},{r.inner.seed.seed},{r.inner.y}\n")


def read_reports(path) -> list[PemReport]:
    """Read the CSV written by write_reports."""
    from .freq_oracle import HashSeed

    path = Path(path)
    reports = []
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != "group,seed,y":
            raise ValueError(f"{path}: expected header 'group,seed,y', got {header!r}")
        for lineno, line in enumerate(handle, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            group, seed, y = (int(p) for p in parts)
            reports.append(
                PemReport(group=group, inner=OlhReport(seed=HashSeed(seed), y=y))
            )
    return reports
