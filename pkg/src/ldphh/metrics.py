"""Output-quality metrics for heavy-hitter identification.

Compares a protocol's identified set against the exact top-k ground truth
using the F-measure, a rank-weighted cumulative score, and the mean squared
error of the count estimates over correctly identified values.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitstrings import BitValue


@dataclass(frozen=True)
class GroundTruth:
    """True top-k values in rank order with their exact counts."""

    values: tuple[BitValue, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.counts):
            raise ValueError("values and counts must have equal length")
        if len(set(self.values)) != len(self.values):
            raise ValueError("ground-truth values must be distinct")
        if any(a < b for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("ground-truth counts must be non-increasing in rank")

    @classmethod
    def from_pairs(cls, pairs) -> "GroundTruth":
        pairs = list(pairs)
        return cls(
            values=tuple(v for v, _ in pairs),
            counts=tuple(int(c) for _, c in pairs),
        )

    @property
    def k(self) -> int:
        return len(self.values)

    def count_of(self, v: BitValue) -> int:
        return self.counts[self.values.index(v)]


@dataclass(frozen=True)
class Identified:
    """A protocol's output values with their estimated counts."""

    values: tuple[BitValue, ...]
    estimates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.estimates):
            raise ValueError("values and estimates must have equal length")
        if len(set(self.values)) != len(self.values):
            raise ValueError("identified values must be distinct")

    @classmethod
    def from_pairs(cls, pairs) -> "Identified":
        pairs = list(pairs)
        return cls(
            values=tuple(v for v, _ in pairs),
            estimates=tuple(float(e) for _, e in pairs),
        )

    def estimate_of(self, v: BitValue) -> float:
        return self.estimates[self.values.index(v)]


def f1(truth: GroundTruth, found: Identified) -> float:
    """Harmonic mean of precision and recall; 0 on empty intersection."""
    if not truth.values or not found.values:
        return 0.0
    hits = len(set(truth.values) & set(found.values))
    if hits == 0:
        return 0.0
    precision = hits / len(found.values)
    recall = hits / len(truth.values)
    return 2.0 * precision * recall / (precision + recall)


def ncr(truth: GroundTruth, found: Identified, k: int) -> float:
    """Rank-weighted score: value at true rank j earns k+1-j, normalized."""
    if truth.k != k:
        raise ValueError(f"truth has {truth.k} ranked values, k={k} requested")
    quality = {v: k - j for j, v in enumerate(truth.values)}
    total = sum(quality.get(v, 0) for v in found.values)
    return total / (k * (k + 1) / 2.0)


def est_var(truth: GroundTruth, found: Identified) -> float:
    """Mean squared error of estimates over correctly identified values."""
    true_count = dict(zip(truth.values, truth.counts))
    errors = [
        (true_count[v] - e) ** 2
        for v, e in zip(found.values, found.estimates)
        if v in true_count
    ]
    if not errors:
        raise ValueError("no identified value appears in the ground truth")
    return sum(errors) / len(errors)
