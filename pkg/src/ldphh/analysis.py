"""Analytic utility model for the prefix-extension protocol.

Models each round's support counts as normals: a value with frequency f_j
is supported with per-report probability p_j = p*f_j + q*(1-f_j), while
the N_i non-frequent candidates sit at the noise level q.  The rank
threshold is the expected (k-j)-th largest noise support, and the chance
that value j survives a round is the normal tail above that threshold.
Includes the extension-width optimizer, the user-partition versus
budget-split comparison, the variance-gain lemma check, and
normal-distribution numerics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import DistributionSpec
from .freq_oracle import olh_params, olh_variance
from .pem import PemConfig

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Rational approximation coefficients for the inverse normal CDF
# (P. J. Acklam's algorithm, maximal relative error about 1.15e-9).
_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def _inv_cdf_approx(p: float) -> float:
    if p < _P_LOW:
        t = math.sqrt(-2.0 * math.log(p))
        return (
            ((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]
        ) / ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0)
    if p > 1.0 - _P_LOW:
        t = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(
            ((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]
        ) / ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0)
    t = p - 0.5
    r = t * t
    return (
        (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5])
        * t
        / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    )


def normal_inv_cdf(p: float) -> float:
    """Inverse standard normal CDF; rational approximation plus one
    Newton-Halley refinement step."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be strictly inside (0, 1), got {p}")
    x = _inv_cdf_approx(p)
    err = normal_cdf(x) - p
    u = err * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


class NormalDist:
    """Stateless standard-normal numerics."""

    @staticmethod
    def cdf(x: float) -> float:
        return normal_cdf(x)

    @staticmethod
    def inv_cdf(p: float) -> float:
        return normal_inv_cdf(p)


@dataclass(frozen=True)
class RoundStats:
    """Normal model of one round's support counts for a rank-j value.

    n_i users answer; a holder of the value is supported with probability
    p, a non-holder with probability q; N_i candidates carry no signal.
    """

    n_i: float
    p: float
    q: float
    f_j: float
    N_i: int

    def __post_init__(self) -> None:
        if self.n_i < 1:
            raise ValueError(f"round population must be >= 1, got {self.n_i}")
        if not 0.0 < self.q < self.p < 1.0:
            raise ValueError(f"need 0 < q < p < 1, got p={self.p}, q={self.q}")
        if not 0.0 <= self.f_j <= 1.0:
            raise ValueError(f"frequency must be in [0, 1], got {self.f_j}")
        if self.N_i < 1:
            raise ValueError(f"N_i must be >= 1, got {self.N_i}")

    @property
    def p_j(self) -> float:
        return self.p * self.f_j + self.q * (1.0 - self.f_j)

    @property
    def mu_j(self) -> float:
        return self.n_i * self.p_j

    @property
    def sigma_j(self) -> float:
        return math.sqrt(self.n_i * self.p_j * (1.0 - self.p_j))

    @property
    def mu_0(self) -> float:
        return self.n_i * self.q

    @property
    def sigma_0(self) -> float:
        return math.sqrt(self.n_i * self.q * (1.0 - self.q))


def round_stats(n_i: float, eps: float, f_j: float, N_i: int) -> RoundStats:
    """RoundStats with the hashing oracle's (p, q) at budget eps."""
    params = olh_params(eps)
    return RoundStats(n_i=n_i, p=params.p, q=params.q, f_j=f_j, N_i=N_i)


@dataclass(frozen=True)
class WeightScheme:
    """Per-rank weights w_j of the utility score."""

    kind: str
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    @classmethod
    def f_measure(cls, k: int) -> "WeightScheme":
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        return cls(kind="f1", weights=(1.0 / k,) * k)

    @classmethod
    def cumulative_rank(cls, k: int) -> "WeightScheme":
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        total = k * (k + 1) / 2.0
        return cls(kind="ncr", weights=tuple((k + 1 - j) / total for j in range(1, k + 1)))


def rank_threshold(stats: RoundStats, slots: int) -> float:
    """Support level of the slots-th largest pure-noise candidate.

    The tail ratio slots/N_i is clamped to [1/(2N_i), 1 - 1/(2N_i)] so the
    boundary cases slots = 0 and slots >= N_i stay finite.
    """
    ratio = slots / stats.N_i
    lo = 1.0 / (2.0 * stats.N_i)
    ratio = min(max(ratio, lo), 1.0 - lo)
    return -normal_inv_cdf(ratio) * stats.sigma_0 + stats.mu_0


def ident_prob(stats: RoundStats, j: int, k: int) -> float:
    """Chance a rank-j value beats the (k-j)-th noise order statistic."""
    if not 1 <= j <= k:
        raise ValueError(f"rank must satisfy 1 <= j <= k, got j={j}, k={k}")
    threshold = rank_threshold(stats, k - j)
    return normal_cdf((stats.mu_j - threshold) / stats.sigma_j)


def _round_populations(cfg: PemConfig, n: float) -> list[float]:
    return [max(1.0, n * frac) for frac in cfg.round_group_fracs()]


def _round_noise_sizes(cfg: PemConfig) -> list[int]:
    return [max(1, size - cfg.k) for size in cfg.round_domain_sizes()]


def per_value_probs(dist: DistributionSpec, cfg: PemConfig, n: float, support: int) -> np.ndarray:
    """End-to-end identification probability for ranks 1..k."""
    if support < cfg.k:
        raise ValueError(f"support {support} must be >= k={cfg.k}")
    freqs = dist.freqs(support)[: cfg.k]
    params = olh_params(cfg.eps)
    populations = _round_populations(cfg, n)
    noise_sizes = _round_noise_sizes(cfg)
    probs = np.ones(cfg.k, dtype=np.float64)
    for n_i, N_i in zip(populations, noise_sizes):
        for j in range(1, cfg.k + 1):
            stats = RoundStats(n_i=n_i, p=params.p, q=params.q, f_j=freqs[j - 1], N_i=N_i)
            probs[j - 1] *= ident_prob(stats, j, cfg.k)
    return probs


def utility_score(
    dist: DistributionSpec,
    cfg: PemConfig,
    n: float,
    weights: WeightScheme | None = None,
    support: int | None = None,
) -> float:
    """Weighted identification probability over the top-k ranks."""
    if weights is None:
        weights = WeightScheme.f_measure(cfg.k)
    if len(weights.weights) != cfg.k:
        raise ValueError(f"weights cover {len(weights.weights)} ranks, k={cfg.k}")
    if support is None:
        support = default_support(dist, cfg.k)
    probs = per_value_probs(dist, cfg, n, support)
    return float(np.dot(np.asarray(weights.weights), probs))


def default_support(dist: DistributionSpec, k: int) -> int:
    """Modeled support size when the caller gives none."""
    if dist.kind == "empirical":
        return len(dist.values)
    return max(64, 2 * k)


def optimize(
    dist: DistributionSpec,
    m: int,
    k: int,
    n: float,
    eps: float,
    query_limit: int,
    weights: WeightScheme | None = None,
    support: int | None = None,
) -> PemConfig:
    """Highest-scoring uniform extension width within the query limit.

    Enumerates every feasible eta (same accounting as plan), scores each,
    and returns the argmax; ties go to the smaller eta.
    """
    gamma = max((k - 1).bit_length(), 0)
    if gamma >= m:
        raise ValueError(f"k={k} needs {gamma} prefix bits but values have only {m}")
    best_cfg = None
    best_score = -1.0
    for eta in range(1, m - gamma + 1):
        g = math.ceil((m - gamma) / eta)
        if (1 << (gamma + eta)) * g > query_limit:
            continue
        cfg = PemConfig(
            m=m, gamma=gamma, eta=eta, g=g, k=k, eps=eps, query_limit=query_limit
        )
        score = utility_score(dist, cfg, n, weights=weights, support=support)
        if score > best_score + 1e-12:
            best_score = score
            best_cfg = cfg
    if best_cfg is None:
        raise ValueError(
            f"no extension width fits query_limit={query_limit} at m={m}, k={k}"
        )
    return best_cfg


def variance_gain(x: float) -> float:
    """E(x) = (e^x - 1)^2 / e^x, the inverse variance factor of the oracle.

    olh_variance(n, x) equals 4n/E(x), so larger E means a sharper oracle.
    """
    e = math.exp(x)
    return (e - 1.0) ** 2 / e


def lemma_E_check(eps: float, g: int) -> bool:
    """Whether splitting the budget g ways loses more than a factor g:
    E(eps/g) < E(eps)/g."""
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    if g < 2:
        raise ValueError(f"g must be >= 2, got {g}")
    return variance_gain(eps / g) < variance_gain(eps) / g


def compare_partition_vs_split(
    n_i: float, f: float, k: int, N_i: int, eps: float, g: int
) -> tuple[float, float]:
    """Normal-deviate scores of the two ways to pay for g phases.

    P1 partitions users (each phase gets n_i/g users at full eps); P2
    splits the budget (all users, eps/g each).  Larger is better; both
    reduce to the same value at g = 1.
    """
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    a = normal_inv_cdf(
        min(max((k - 1) / N_i, 1.0 / (2.0 * N_i)), 1.0 - 1.0 / (2.0 * N_i))
    )
    b = (f / 2.0) * (1.0 - f / 2.0)
    c = f * math.sqrt(n_i) / 2.0
    e_full = variance_gain(eps)
    e_split = variance_gain(eps / g)
    p1 = a / math.sqrt(1.0 + b * e_full) + c / math.sqrt(g / e_full + g * b)
    p2 = a / math.sqrt(1.0 + b * e_split) + c / math.sqrt(1.0 / e_split + b)
    return p1, p2


def min_population(
    f: float, eps: float, sigma_multiple: float, rounded_coefficient: bool = True
) -> int:
    """Smallest n whose signal f*n clears sigma_multiple noise deviations.

    The oracle's standard deviation is sdev(eps)*sqrt(n); solving
    f*n >= sigma_multiple*sdev*sqrt(n) gives n = (sigma_multiple*sdev/f)^2.
    By default sdev is rounded to one decimal, matching the convention of
    published worked examples; pass rounded_coefficient=False for the
    exact closed form.
    """
    if not 0.0 < f < 1.0:
        raise ValueError(f"target frequency must be in (0, 1), got {f}")
    if sigma_multiple < 0:
        raise ValueError(f"sigma_multiple must be >= 0, got {sigma_multiple}")
    sdev = math.sqrt(olh_variance(1, eps))
    if rounded_coefficient:
        sdev = round(sdev, 1)
    return math.ceil((sigma_multiple * sdev / f) ** 2)


def analysis_report(
    dist: DistributionSpec,
    cfg: PemConfig,
    n: float,
    support: int | None = None,
) -> dict:
    """Per-rank probabilities plus both utility scores, as a document."""
    if support is None:
        support = default_support(dist, cfg.k)
    freqs = dist.freqs(support)[: cfg.k]
    probs = per_value_probs(dist, cfg, n, support)
    score_f1 = float(np.dot(WeightScheme.f_measure(cfg.k).weights, probs))
    score_ncr = float(np.dot(WeightScheme.cumulative_rank(cfg.k).weights, probs))
    return {
        "config": {**cfg.to_dict(), "n": n, "support": support, "dist": dist.to_dict()},
        "per_value": [
            {"rank": j + 1, "f": float(freqs[j]), "prob": float(probs[j])}
            for j in range(cfg.k)
        ],
        "score_f1": score_f1,
        "score_ncr": score_ncr,
    }
