"""Experiment orchestration: seeded protocol runs, scoring, and rendering.

Turns a declarative experiment description (which protocols, which privacy
budgets, how many repetitions) into scored result rows.  Repetitions run in
parallel with per-repetition derived seeds, so outputs are byte-identical
across runs of the same spec regardless of scheduling.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import mcm_plan, mcm_run, partition_users_variant, spm_plan, spm_run
from .datagen import load
from .metrics import GroundTruth, Identified, est_var, f1, ncr
from .pem import PemConfig, plan, run_threshold, run_topk
from .randomness import derive_seed

PROTOCOLS = ("pem", "spm", "mcm")
CSV_HEADER = "protocol,variant,eps,k,theta,seed,f1,ncr,est_var,queries,wall_ms"
DEFAULT_QUERY_LIMIT = 1 << 20


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: protocols x budgets x repetitions on one dataset."""

    protocols: tuple[str, ...]
    data_path: str
    eps_values: tuple[float, ...]
    k: int | None = None
    theta: float | None = None
    reps: int = 1
    master_seed: int = 0
    query_limit: int = DEFAULT_QUERY_LIMIT
    m: int | None = None
    etas: tuple[int, ...] | None = None
    k_values: tuple[int, ...] | None = None
    variant: str = "split"
    final_frac: float = 0.1
    seg_len: int | None = None
    mode: str = "int"
    timing: bool = False

    def __post_init__(self) -> None:
        if not self.protocols:
            raise ValueError("at least one protocol is required")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ValueError(f"unknown protocol {p!r}; choose from {PROTOCOLS}")
        if len(set(self.protocols)) != len(self.protocols):
            raise ValueError("protocols must be distinct")
        if not self.eps_values:
            raise ValueError("at least one epsilon is required")
        for eps in self.eps_values:
            if not eps > 0:
                raise ValueError(f"epsilon must be positive, got {eps}")
        if self.reps < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.reps}")
        has_k = self.k is not None or self.k_values is not None
        if has_k == (self.theta is not None):
            raise ValueError("exactly one of k and theta is required")
        if self.k is not None and self.k_values is not None:
            raise ValueError("give either one k or a k sweep, not both")
        if self.theta is not None and not 0 < self.theta < 1:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")
        if self.theta is not None and self.protocols != ("pem",):
            raise ValueError("threshold mode is only defined for pem")
        if self.etas is not None and self.protocols != ("pem",):
            raise ValueError("an eta sweep is only defined for pem")
        if self.variant not in ("split", "partition"):
            raise ValueError(f"variant must be split or partition, got {self.variant}")
        if self.variant == "partition" and "pem" in self.protocols:
            raise ValueError("the partition variant applies to spm and mcm only")
        if not 0 < self.final_frac < 1:
            raise ValueError(f"final_frac must be in (0, 1), got {self.final_frac}")
        if self.query_limit < 1:
            raise ValueError(f"query_limit must be >= 1, got {self.query_limit}")


@dataclass(frozen=True)
class ResultRow:
    """One scored repetition."""

    protocol: str
    variant: str
    eps: float
    k: int | None
    theta: float | None
    seed: int
    f1: float
    ncr: float | None
    est_var: float | None
    queries: int
    wall_ms: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 out of range: {self.f1}")
        if self.ncr is not None and not 0.0 <= self.ncr <= 1.0:
            raise ValueError(f"ncr out of range: {self.ncr}")
        if self.est_var is not None and self.est_var < 0:
            raise ValueError(f"est_var out of range: {self.est_var}")
        if self.queries < 0 or self.wall_ms < 0:
            raise ValueError("queries and wall_ms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "variant": self.variant,
            "eps": self.eps,
            "k": self.k,
            "theta": self.theta,
            "seed": self.seed,
            "f1": self.f1,
            "ncr": self.ncr,
            "est_var": self.est_var,
            "queries": self.queries,
            "wall_ms": self.wall_ms,
        }


def _cell_key(row: ResultRow) -> tuple:
    return (
        row.protocol,
        row.variant,
        row.eps,
        -1 if row.k is None else row.k,
        -1.0 if row.theta is None else row.theta,
    )


def load_experiment_data(spec: ExperimentSpec):
    """Dataset rows plus the ground-truth sidecar document."""
    sidecar = Path(spec.data_path + ".truth.json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing ground-truth sidecar {sidecar}")
    doc = json.loads(sidecar.read_text(encoding="utf-8"))
    m = spec.m if spec.m is not None else int(doc["m"])
    if m != int(doc["m"]):
        raise ValueError(f"--m {m} disagrees with sidecar m={doc['m']}")
    dataset = load(spec.data_path, m, mode=spec.mode)
    return dataset, doc


def _truth_for(doc: dict, k: int | None, theta: float | None, n: int) -> GroundTruth:
    from .bitstrings import BitValue

    m = int(doc["m"])
    pairs = [
        (BitValue.from_hex(item["value_hex"], m), int(item["count"]))
        for item in doc["true_topk"]
    ]
    if theta is not None:
        pairs = [(v, c) for v, c in pairs if c / n > theta]
    else:
        if len(pairs) < k:
            raise ValueError(f"ground truth has {len(pairs)} values, k={k} requested")
        pairs = pairs[:k]
    return GroundTruth.from_pairs(pairs)


def _pem_config(
    m: int, k_eff: int, eps: float, limit: int, eta: int | None
) -> PemConfig:
    if eta is None:
        return plan(m, k_eff, limit, eps)
    gamma = (k_eff - 1).bit_length()
    if eta > m - gamma:
        raise ValueError(f"eta={eta} exceeds the {m - gamma} bits left after gamma")
    g = math.ceil((m - gamma) / eta)
    return PemConfig(
        m=m, gamma=gamma, eta=eta, g=g, k=k_eff, eps=eps, query_limit=limit
    )


def _run_cell(spec: ExperimentSpec, dataset, protocol, eps, k, eta, seed):
    m = dataset.m
    if protocol == "pem":
        if spec.theta is not None:
            k_eff = math.ceil(1.0 / spec.theta)
            cfg = _pem_config(m, k_eff, eps, spec.query_limit, eta)
            return run_threshold(dataset, cfg, spec.theta, seed)
        cfg = _pem_config(m, k, eps, spec.query_limit, eta)
        return run_topk(dataset, cfg, seed)
    if protocol == "spm":
        cfg = spm_plan(m, k, spec.query_limit, eps)
        if spec.variant == "partition":
            cfg = partition_users_variant(cfg, spec.final_frac)
        return spm_run(dataset, cfg, k=k, master_seed=seed)
    cfg = mcm_plan(m, k, spec.query_limit, eps, seg_len=spec.seg_len)
    if spec.variant == "partition":
        cfg = partition_users_variant(cfg, spec.final_frac)
    return mcm_run(dataset, cfg, k, master_seed=seed)


def _score(result, truth: GroundTruth):
    if not result.identified or not truth.values:
        return 0.0, (0.0 if truth.values else None), None
    found = Identified.from_pairs(result.identified)
    score_f1 = f1(truth, found)
    score_ncr = ncr(truth, found, truth.k)
    try:
        variance = est_var(truth, found)
    except ValueError:
        variance = None
    return score_f1, score_ncr, variance


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """All repetitions of all cells, ordered by (protocol, eps, k, seed)."""
    dataset, doc = load_experiment_data(spec)
    n = int(doc["n"])
    k_list = spec.k_values if spec.k_values is not None else (spec.k,)
    eta_list = spec.etas if spec.etas is not None else (None,)
    seeds = [derive_seed(spec.master_seed, "harness.rep", i) for i in range(spec.reps)]

    tasks = []
    for protocol in spec.protocols:
        for eps in spec.eps_values:
            for k in k_list:
                for eta in eta_list:
                    truth = _truth_for(doc, k, spec.theta, n)
                    for seed in seeds:
                        tasks.append((protocol, eps, k, eta, seed, truth))

    def one(task):
        protocol, eps, k, eta, seed, truth = task
        t0 = time.perf_counter()
        result = _run_cell(spec, dataset, protocol, eps, k, eta, seed)
        wall_ms = (time.perf_counter() - t0) * 1000.0 if spec.timing else 0.0
        score_f1, score_ncr, variance = _score(result, truth)
        variant = result.variant if protocol != "pem" else ""
        if protocol == "pem" and eta is not None:
            variant = f"eta={eta}"
        return ResultRow(
            protocol=protocol,
            variant=variant,
            eps=eps,
            k=k,
            theta=spec.theta,
            seed=seed,
            f1=score_f1,
            ncr=score_ncr,
            est_var=variance,
            queries=result.queries_used,
            wall_ms=wall_ms,
        )

    workers = min(8, max(1, spec.reps))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, tasks))
    rows.sort(key=lambda r: (_cell_key(r), r.seed))
    return rows


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Per-cell mean and sample standard deviation, in row order."""
    cells: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        cells.setdefault(_cell_key(row), []).append(row)

    def agg(values):
        values = [v for v in values if v is not None]
        if not values:
            return None, None
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return mean, std

    out = []
    for key, members in cells.items():
        protocol, variant, eps, k, theta = key
        f1_m, f1_s = agg([r.f1 for r in members])
        ncr_m, ncr_s = agg([r.ncr for r in members])
        var_m, var_s = agg([r.est_var for r in members])
        q_m, q_s = agg([r.queries for r in members])
        w_m, w_s = agg([r.wall_ms for r in members])
        out.append(
            {
                "protocol": protocol,
                "variant": variant,
                "eps": eps,
                "k": None if k < 0 else k,
                "theta": None if theta < 0 else theta,
                "reps": len(members),
                "f1_mean": f1_m,
                "f1_std": f1_s,
                "ncr_mean": ncr_m,
                "ncr_std": ncr_s,
                "est_var_mean": var_m,
                "est_var_std": var_s,
                "queries_mean": q_m,
                "wall_ms_mean": w_m,
            }
        )
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(rows: list[ResultRow], summary: list[dict] | None = None) -> str:
    """Fixed-header CSV; summary cells appear as seed=mean / seed=std rows."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.protocol, r.variant, r.eps, r.k, r.theta, r.seed,
                    r.f1, r.ncr, r.est_var, r.queries, r.wall_ms,
                )
            )
        )
    for cell in summary or []:
        for stat in ("mean", "std"):
            suffix = "_mean" if stat == "mean" else "_std"
            lines.append(
                ",".join(
                    _fmt(v)
                    for v in (
                        cell["protocol"], cell["variant"], cell["eps"],
                        cell["k"], cell["theta"], stat,
                        cell.get("f1" + suffix), cell.get("ncr" + suffix),
                        cell.get("est_var" + suffix),
                        cell["queries_mean"] if stat == "mean" else None,
                        cell["wall_ms_mean"] if stat == "mean" else None,
                    )
                )
            )
    return "\n".join(lines) + "\n"


def render_json(rows: list[ResultRow], summary: list[dict] | None = None) -> str:
    doc = {"rows": [r.to_dict() for r in rows], "summary": summary or []}
    return json.dumps(doc, indent=2) + "\n"
