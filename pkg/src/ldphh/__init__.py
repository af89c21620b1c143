"""Locally differentially private heavy-hitter identification.

A numpy-based library implementing LDP frequency oracles (randomized
response and optimized local hashing), the prefix-extension protocol for
top-k and threshold identification, two segment-based baseline protocols,
an analytic utility model with a parameter optimizer, synthetic data
generation, and an experiment harness with a command-line interface.
"""

__version__ = "0.1.0"
