"""
Predicting protocol utility before running it
=============================================

The analysis module computes, in closed form, the probability that each
heavy hitter survives every round of the prefix search. That makes it
possible to choose round schedules analytically instead of by trial
runs. This script checks the predictions against a small Monte-Carlo
simulation and then uses the model to answer two planning questions.
"""

import numpy as np

from ldphh import metrics
from ldphh.analysis import min_population, optimize, per_value_probs, utility_score
from ldphh.datagen import DistributionSpec, GeneratorSpec, generate
from ldphh.pem import PemConfig, run_topk

n = 50_000
dist = DistributionSpec.zipf(1.5)
cfg = PemConfig(m=16, gamma=4, eta=4, g=3, k=8, eps=1.0)

# ---------------------------------------------------------------------
# Analytic per-rank identification probabilities.
# ---------------------------------------------------------------------
probs = per_value_probs(dist, cfg, n, support=64)
print("analytic identification probability by rank:")
print("  " + "  ".join(f"{p:.3f}" for p in probs))
print(f"analytic utility score (uniform weights): {utility_score(dist, cfg, n):.4f}")

# ---------------------------------------------------------------------
# Monte-Carlo check: run the real protocol 60 times on one sampled
# dataset and compare empirical hit rates per rank.
# ---------------------------------------------------------------------
spec = GeneratorSpec(dist=dist, support_size=64, n=n, m=16, master_seed=23)
dataset = generate(spec)
pairs = dataset.top_k(cfg.k)
truth = metrics.GroundTruth.from_pairs(pairs)
trials = 60
hits = np.zeros(cfg.k)
f1s = []
for t in range(trials):
    result = run_topk(dataset, cfg, master_seed=100 + t)
    found = set(v for v, _ in result.identified)
    for j, v in enumerate(truth.values):
        hits[j] += v in found
    f1s.append(metrics.f1(truth, metrics.Identified.from_pairs(result.identified)))
print(f"\nempirical rates over {trials} runs:")
print("  " + "  ".join(f"{h / trials:.3f}" for h in hits))
print(f"mean F1 {np.mean(f1s):.4f} vs analytic score {utility_score(dist, cfg, n):.4f}")

# ---------------------------------------------------------------------
# Planning question 1: how many users are needed before a value held by
# 0.1% of the population clears three standard deviations of oracle
# noise at eps = ln 10?
# ---------------------------------------------------------------------
needed = min_population(0.001, np.log(10), 3)
print(f"\nusers needed for f=0.1% at eps=ln10, 3 sigma: {needed:,}")

# ---------------------------------------------------------------------
# Planning question 2: best round schedule under a query budget. The
# optimizer scores every feasible (gamma, eta) pair with the analytic
# model and returns the best.
# ---------------------------------------------------------------------
best = optimize(dist, m=24, k=8, n=n, eps=1.0, query_limit=4096)
print(f"best schedule under 4096 queries: gamma={best.gamma}, eta={best.eta},"
      f" g={best.g} ({best.total_queries()} queries)")
print(f"predicted score {utility_score(dist, best, n):.4f}")
