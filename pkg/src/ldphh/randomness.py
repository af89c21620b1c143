"""Deterministic seed derivation for reproducible multi-user simulations.

Everything derives from one 64-bit master seed.  Per-user randomness comes
from a counter scheme: ``draw(master, label, index, counter)`` feeds a fixed
64-bit avalanche mixer, so any user's draws can be recomputed independently
of evaluation order.  The mixer is the SplitMix64 finalizer, which also
serves as the public hash-family mixer in the frequency oracle.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB
GOLDEN = 0x9E3779B97F4A7C15

_U = np.uint64


def mix64(x: int) -> int:
    """64-bit avalanche mix (SplitMix64 finalizer)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _MULT1) & _MASK
    x = ((x ^ (x >> 27)) * _MULT2) & _MASK
    return x ^ (x >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> _U(30)
    x *= _U(_MULT1)
    x ^= x >> _U(27)
    x *= _U(_MULT2)
    x ^= x >> _U(31)
    return x


def _label_tag(label: str) -> int:
    # FNV-1a over the label bytes; labels separate independent streams.
    h = 0xCBF29CE484222325
    for b in label.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


def derive_seed(master: int, label: str, index: int = 0) -> int:
    """A child 64-bit seed, stable in (master, label, index)."""
    base = mix64((master & _MASK) ^ _label_tag(label))
    return mix64((base + (index + 1) * GOLDEN) & _MASK)


def derive_seed_array(master: int, label: str, n: int) -> np.ndarray:
    """Vectorized derive_seed over index 0..n-1 (bit-identical to the scalar)."""
    base = _U(mix64((master & _MASK) ^ _label_tag(label)))
    idx = np.arange(1, n + 1, dtype=np.uint64) * _U(GOLDEN)
    return mix64_array(base + idx)


def stream_uint64(master: int, label: str, n: int, counter: int = 0) -> np.ndarray:
    """One uint64 draw per index 0..n-1 for the given (label, counter) slot."""
    base = _U(mix64((master & _MASK) ^ _label_tag(label)))
    idx = np.arange(1, n + 1, dtype=np.uint64) * _U(GOLDEN)
    return mix64_array(base + idx + _U(mix64(counter + 1)))


def stream_uniform(master: int, label: str, n: int, counter: int = 0) -> np.ndarray:
    """One float64 in [0, 1) per index, from stream_uint64."""
    # Top 53 bits keep the conversion exact and strictly below 1.0.
    return (stream_uint64(master, label, n, counter) >> _U(11)).astype(np.float64) * 2.0**-53
