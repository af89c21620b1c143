"""Shared exhaustive-expectation oracles for the joint estimators.

These recompute report distributions from first principles (enumerating
every hash function and every reported bucket) so the estimator tests
never trust the code under test.
"""

import itertools
import math

import numpy as np

from ldphh.freq_oracle import olh_params


def _support_table(domain_size: int, eps: float) -> np.ndarray:
    """T[v, a] = P(one report of value v supports pattern a).

    Enumerates every function from the domain into the d' buckets and every
    reported bucket, weighting by the bucket randomizer's keep and flip
    probabilities, so the table comes straight from the mechanism.
    """
    params = olh_params(eps)
    dp = params.d_prime
    keep = math.exp(eps) / (math.exp(eps) + dp - 1)
    flip = (1.0 - keep) / (dp - 1)
    table = np.zeros((domain_size, domain_size))
    weight = 1.0 / dp**domain_size
    for fn in itertools.product(range(dp), repeat=domain_size):
        for y in range(dp):
            supported = [a for a in range(domain_size) if fn[a] == y]
            for v in range(domain_size):
                w = weight * (keep if y == fn[v] else flip)
                for a in supported:
                    table[v, a] += w
    return table


def _expected_joint(tables, assignment, positions, patterns) -> float:
    """E[number of users whose reports support patterns at the positions].

    Reports at different positions are physically independent, so the
    per-user expectation is the product of single-report probabilities.
    """
    total = 0.0
    for values in assignment:
        prod = 1.0
        for pos, a in zip(positions, patterns):
            prod *= tables[pos][values[pos], a]
        total += prod
    return total


def _true_joint(assignment, positions, patterns) -> int:
    return sum(
        1
        for values in assignment
        if all(values[pos] == a for pos, a in zip(positions, patterns))
    )


def _level_one(tables, assignment, pos, a, p, q) -> float:
    n = len(assignment)
    return (_expected_joint(tables, assignment, (pos,), (a,)) - n * q) / (p - q)
