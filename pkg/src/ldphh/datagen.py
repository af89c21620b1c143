"""Synthetic dataset generation and encoding of external value lists.

Datasets are multisets of m-bit values.  The generator draws a random
support of distinct values, assigns them analytic frequencies (power-law,
geometric, or user-supplied), and samples reports i.i.d.  Exact counting
over the generated data provides the ground truth consumed by the metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bitstrings import (
    BitValue,
    ints_to_matrix,
    matrix_to_hex,
    num_bytes,
    unique_rows_with_counts,
)
from .randomness import derive_seed


@dataclass(frozen=True)
class DistributionSpec:
    """Analytic rank-frequency model shared by the generator and analysis.

    kind "zipf": f_j proportional to (j + drop)^-s.
    kind "exponential": f_j proportional to exp(-rate*(j-1)).
    kind "empirical": explicit frequency list, renormalized.
    """

    kind: str
    s: float = 1.5
    drop: int = 0
    rate: float = 0.05
    values: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in ("zipf", "exponential", "empirical"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "zipf" and (self.s <= 0 or self.drop < 0):
            raise ValueError(f"need s > 0 and drop >= 0, got s={self.s}, drop={self.drop}")
        if self.kind == "exponential" and self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.kind == "empirical":
            if not self.values:
                raise ValueError("empirical distribution needs at least one frequency")
            if any(f < 0 for f in self.values) or sum(self.values) <= 0:
                raise ValueError("empirical frequencies must be non-negative with positive sum")

    @classmethod
    def zipf(cls, s: float = 1.5, drop: int = 0) -> "DistributionSpec":
        return cls(kind="zipf", s=s, drop=drop)

    @classmethod
    def exponential(cls, rate: float = 0.05) -> "DistributionSpec":
        return cls(kind="exponential", rate=rate)

    @classmethod
    def empirical(cls, values) -> "DistributionSpec":
        return cls(kind="empirical", values=tuple(float(f) for f in values))

    def freqs(self, support: int) -> np.ndarray:
        """Normalized frequencies for ranks 1..support."""
        if support < 1:
            raise ValueError(f"support must be >= 1, got {support}")
        if self.kind == "zipf":
            return zipf_freqs(self.s, support, self.drop)
        if self.kind == "exponential":
            return exp_freqs(self.rate, support)
        if support > len(self.values):
            raise ValueError(
                f"empirical distribution has {len(self.values)} frequencies, "
                f"{support} requested"
            )
        weights = np.asarray(self.values[:support], dtype=np.float64)
        return weights / weights.sum()

    def to_dict(self) -> dict:
        if self.kind == "zipf":
            return {"kind": "zipf", "s": self.s, "drop": self.drop}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        return {"kind": "empirical", "values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        kind = data.get("kind")
        if kind == "zipf":
            return cls.zipf(s=data["s"], drop=data.get("drop", 0))
        if kind == "exponential":
            return cls.exponential(rate=data["rate"])
        if kind == "empirical":
            return cls.empirical(data["values"])
        raise ValueError(f"unknown distribution kind {kind!r}")


def zipf_freqs(s: float, support: int, drop: int = 0) -> np.ndarray:
    """Power-law frequencies f_j proportional to (j + drop)^-s, normalized."""
    if s <= 0:
        raise ValueError(f"exponent must be positive, got {s}")
    if support < 1:
        raise ValueError(f"support must be >= 1, got {support}")
    if drop < 0:
        raise ValueError(f"drop must be >= 0, got {drop}")
    ranks = np.arange(1, support + 1, dtype=np.float64)
    weights = (ranks + drop) ** (-s)
    return weights / weights.sum()


def exp_freqs(rate: float, support: int) -> np.ndarray:
    """Geometric frequencies f_j proportional to exp(-rate*(j-1)), normalized."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if support < 1:
        raise ValueError(f"support must be >= 1, got {support}")
    ranks = np.arange(support, dtype=np.float64)
    weights = np.exp(-rate * ranks)
    return weights / weights.sum()


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one synthetic dataset."""

    dist: DistributionSpec
    support_size: int
    n: int
    m: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"bit length must be >= 1, got {self.m}")
        if self.n < 1:
            raise ValueError(f"dataset size must be >= 1, got {self.n}")
        if self.support_size < 1:
            raise ValueError(f"support_size must be >= 1, got {self.support_size}")
        if self.m < 64 and self.support_size > (1 << self.m):
            raise ValueError(
                f"support_size {self.support_size} exceeds domain size 2^{self.m}"
            )


@dataclass(frozen=True)
class Dataset:
    """A multiset of n values of m bits each, packed one row per value."""

    m: int
    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != num_bytes(self.m):
            raise ValueError(
                f"rows must have shape (n, {num_bytes(self.m)}), got {self.rows.shape}"
            )
        if self.rows.shape[0] < 1:
            raise ValueError("dataset must contain at least one value")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def values(self) -> list[BitValue]:
        """Materialize the multiset as BitValue objects."""
        from .bitstrings import matrix_to_ints

        return [BitValue(v, self.m) for v in matrix_to_ints(self.rows, self.m)]

    def value_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact counting: distinct rows (ascending) with multiplicities."""
        return unique_rows_with_counts(self.rows)

    def top_k(self, k: int) -> list[tuple[BitValue, int]]:
        """The k most frequent values, ties broken by value ascending."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        distinct, counts = self.value_counts()
        order = np.argsort(-counts, kind="stable")
        top = order[:k]
        from .bitstrings import matrix_to_ints

        ints = matrix_to_ints(distinct[top], self.m)
        return [(BitValue(v, self.m), int(c)) for v, c in zip(ints, counts[top])]


def _draw_support(rng: np.random.Generator, support_size: int, m: int) -> np.ndarray:
    """Distinct random m-bit values, in draw order."""
    nb = num_bytes(m)
    pad = 8 * nb - m
    seen: set[bytes] = set()
    rows = np.empty((support_size, nb), dtype=np.uint8)
    filled = 0
    while filled < support_size:
        batch = rng.integers(0, 256, size=(support_size, nb), dtype=np.uint8)
        if pad:
            batch[:, -1] &= np.uint8(0xFF << pad & 0xFF)
        for row in batch:
            key = row.tobytes()
            if key in seen:
                continue
            seen.add(key)
            rows[filled] = row
            filled += 1
            if filled == support_size:
                break
    return rows


def generate(spec: GeneratorSpec) -> Dataset:
    """Sample a dataset: distinct support values weighted by spec.dist."""
    rng = np.random.default_rng(derive_seed(spec.master_seed, "datagen"))
    support = _draw_support(rng, spec.support_size, spec.m)
    freqs = spec.dist.freqs(spec.support_size)
    idx = rng.choice(spec.support_size, size=spec.n, p=freqs)
    return Dataset(m=spec.m, rows=support[idx])


def truth_sidecar(dataset: Dataset, spec: GeneratorSpec) -> dict:
    """Ground-truth document: every distinct value with its exact count."""
    distinct, counts = dataset.value_counts()
    order = np.argsort(-counts, kind="stable")
    hexes = matrix_to_hex(distinct[order], dataset.m)
    return {
        "m": dataset.m,
        "n": dataset.n,
        "dist": spec.dist.to_dict(),
        "seed": spec.master_seed,
        "true_topk": [
            {"value_hex": h, "count": int(c)} for h, c in zip(hexes, counts[order])
        ],
    }


def save(dataset: Dataset, path, spec: GeneratorSpec) -> Path:
    """Write the dataset (one decimal integer per line) plus a truth sidecar.

    Returns the sidecar path, `<path>.truth.json`.
    """
    from .bitstrings import matrix_to_ints

    path = Path(path)
    ints = matrix_to_ints(dataset.rows, dataset.m)
    with path.open("w", encoding="utf-8") as out:
        for v in ints:
            out.write(f"{v}\n")
    sidecar = path.with_name(path.name + ".truth.json")
    sidecar.write_text(json.dumps(truth_sidecar(dataset, spec), indent=2) + "\n")
    return sidecar


def _parse_int_line(line: str, lineno: int, m: int) -> int:
    try:
        value = int(line, 10)
    except ValueError:
        raise ValueError(f"line {lineno}: not a decimal integer: {line!r}") from None
    if value < 0:
        raise ValueError(f"line {lineno}: negative value {value}")
    if value >> m:
        raise ValueError(f"line {lineno}: value {value} does not fit in {m} bits")
    return value


def _parse_text_line(line: str, m: int) -> int:
    raw = line.encode("utf-8")
    bits = int.from_bytes(raw, "big")
    have = 8 * len(raw)
    if have >= m:
        return bits >> (have - m)
    return bits << (m - have)


def load(path, m: int, mode: str = "int") -> Dataset:
    """Read one value per line, int or UTF-8 text mode, m bits per value."""
    if mode not in ("int", "text"):
        raise ValueError(f"mode must be 'int' or 'text', got {mode!r}")
    if m < 1:
        raise ValueError(f"bit length must be >= 1, got {m}")
    path = Path(path)
    values: list[int] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if mode == "int":
                if not line.strip():
                    continue
                values.append(_parse_int_line(line.strip(), lineno, m))
            else:
                values.append(_parse_text_line(line, m))
    if not values:
        raise ValueError(f"{path}: no values found")
    if m <= 64:
        rows = ints_to_matrix(np.array(values, dtype=np.uint64), m)
    else:
        rows = ints_to_matrix(values, m)
    return Dataset(m=m, rows=rows)


def load_truth(path, k: int | None = None) -> list[tuple[BitValue, int]]:
    """Read a ground-truth sidecar; optionally keep only the top k entries."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    m = doc["m"]
    entries = [
        (BitValue.from_hex(item["value_hex"], m), int(item["count"]))
        for item in doc["true_topk"]
    ]
    if k is not None:
        if len(entries) < k:
            raise ValueError(f"truth file has {len(entries)} entries, k={k} requested")
        entries = entries[:k]
    return entries
