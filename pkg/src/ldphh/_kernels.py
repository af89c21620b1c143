"""Vectorized support counting for the seeded hash family.

The family hashes a packed bit string under a 64-bit seed by mixing each
(seed, byte-position, byte, length) tuple through an avalanche function and
summing the per-byte residues modulo d'.  Identical results come from three
routes: a scalar reference (freq_oracle.olh_hash), a compiled per-report
loop, and a matrix-product factorization usable when the candidate domain
is a cartesian product of a left and right byte block.  The product route
computes exact integer counts (0/1 matrices, float32 accumulation stays
below 2**24 per chunk).
"""

from __future__ import annotations

import numba
import numpy as np

_U = np.uint64
_MULT1 = _U(0xBF58476D1CE4E5B9)
_MULT2 = _U(0x94D049BB133111EB)

# Byte-position code: (length << 32) | (byte_index << 16) | byte_value.
_LEN_SHIFT = 32
_POS_SHIFT = 16

MAX_BUCKETS = 255  # residues are carried in uint8 tables

_CHUNK = 8192  # reports per block in the vectorized routes


@numba.njit(inline="always")
def _mix64(x):
    x = (x ^ (x >> _U(30))) * _MULT1
    x = (x ^ (x >> _U(27))) * _MULT2
    return x ^ (x >> _U(31))


@numba.njit(cache=True)
def hash_rows(seeds, rows, nbits, d_prime):
    """Bucket (0-based) of each row under its own seed."""
    n, nb = rows.shape
    out = np.empty(n, dtype=np.uint8)
    base = _U(nbits) << _U(_LEN_SHIFT)
    for j in range(n):
        s = seeds[j]
        acc = np.uint32(0)
        for i in range(nb):
            code = base | (_U(i) << _U(_POS_SHIFT)) | _U(rows[j, i])
            acc += np.uint32(_mix64(s ^ code) % _U(d_prime))
        out[j] = acc % np.uint32(d_prime)
    return out


@numba.njit(cache=True)
def _support_counts_loop(seeds, ys0, cand, nbits, d_prime):
    """Per-candidate support counts, one pass per report."""
    n = seeds.shape[0]
    D, nb = cand.shape
    out = np.zeros(D, dtype=np.int64)
    table = np.empty((nb, 256), dtype=np.uint8)
    base = _U(nbits) << _U(_LEN_SHIFT)
    for j in range(n):
        s = seeds[j]
        for i in range(nb):
            pos = base | (_U(i) << _U(_POS_SHIFT))
            for b in range(256):
                table[i, b] = _mix64(s ^ (pos | _U(b))) % _U(d_prime)
        y = ys0[j]
        if nb == 1:
            t0 = table[0]
            for c in range(D):
                out[c] += t0[cand[c, 0]] == y
        elif nb == 2:
            t0, t1 = table[0], table[1]
            y16 = np.uint16(y)
            dp16 = np.uint16(d_prime)
            for c in range(D):
                acc = np.uint16(t0[cand[c, 0]]) + np.uint16(t1[cand[c, 1]])
                if acc >= dp16:
                    acc -= dp16
                out[c] += acc == y16
        else:
            y32 = np.uint32(y)
            dp32 = np.uint32(d_prime)
            for c in range(D):
                acc = np.uint32(0)
                for i in range(nb):
                    acc += table[i, cand[c, i]]
                out[c] += (acc % dp32) == y32
    return out


@numba.njit(cache=True)
def support_matrix(seeds, ys0, cand, nbits, d_prime):
    """Boolean (n, D) matrix: does report j support candidate c."""
    n = seeds.shape[0]
    D, nb = cand.shape
    out = np.zeros((n, D), dtype=np.bool_)
    table = np.empty((nb, 256), dtype=np.uint8)
    base = _U(nbits) << _U(_LEN_SHIFT)
    dp32 = np.uint32(d_prime)
    for j in range(n):
        s = seeds[j]
        for i in range(nb):
            pos = base | (_U(i) << _U(_POS_SHIFT))
            for b in range(256):
                table[i, b] = _mix64(s ^ (pos | _U(b))) % _U(d_prime)
        y32 = np.uint32(ys0[j])
        for c in range(D):
            acc = np.uint32(0)
            for i in range(nb):
                acc += table[i, cand[c, i]]
            out[j, c] = (acc % dp32) == y32
    return out


def _residue_tables(seeds: np.ndarray, nbits: int, nb: int, d_prime: int) -> np.ndarray:
    """(len(seeds), nb, 256) uint8 residues of every byte at every position."""
    from .randomness import mix64_array

    idx = np.arange(nb, dtype=np.uint64)
    byte = np.arange(256, dtype=np.uint64)
    codes = (
        (_U(nbits) << _U(_LEN_SHIFT))
        | (idx[:, None] << _U(_POS_SHIFT))
        | byte[None, :]
    )
    feed = seeds[:, None, None] ^ codes[None, :, :]
    return (mix64_array(feed) % _U(d_prime)).astype(np.uint8)


def _support_counts_product(
    seeds: np.ndarray,
    ys0: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    nbits: int,
    d_prime: int,
) -> np.ndarray:
    """Counts over the row-major product domain left x right."""
    n_left, h = left.shape
    n_right, nb_right = right.shape
    nb = h + nb_right
    left_cols = left.T.astype(np.intp)
    right_cols = right.T.astype(np.intp)
    acc = np.zeros((n_left, n_right), dtype=np.float64)
    for lo in range(0, seeds.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, seeds.shape[0])
        tables = _residue_tables(seeds[lo:hi], nbits, nb, d_prime)
        a = np.zeros((hi - lo, n_left), dtype=np.uint16)
        for i in range(h):
            a += tables[:, i, :][:, left_cols[i]]
        a %= d_prime
        b = np.zeros((hi - lo, n_right), dtype=np.uint16)
        for i in range(nb_right):
            b += tables[:, h + i, :][:, right_cols[i]]
        b %= d_prime
        y = ys0[lo:hi].astype(np.int64)
        for t in range(d_prime):
            u = (a == t).astype(np.float32)
            v = (b == ((y - t) % d_prime)[:, None]).astype(np.float32)
            acc += (u.T @ v).astype(np.float64)
    return np.rint(acc).astype(np.int64).ravel()


def _find_product_split(cand: np.ndarray, nbits: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Split a row-major product domain into its (left, right) byte blocks."""
    D, nb = cand.shape
    best = None
    for h in range(1, nb):
        right_bits = nbits - 8 * h
        if not 1 <= right_bits <= 20:
            continue
        n_right = 1 << right_bits
        if D % n_right:
            continue
        n_left = D // n_right
        if best is None or abs(n_left - n_right) < abs(best[0] - best[1]):
            best = (n_left, n_right, h)
    if best is None:
        return None
    n_left, n_right, h = best
    left = cand[::n_right, :h]
    right = cand[:n_right, h:]
    # The layout must really be the full product, in prefix-major order.
    if not np.array_equal(cand[:, :h], np.repeat(left, n_right, axis=0)):
        return None
    if not np.array_equal(cand[:, h:], np.tile(right, (n_left, 1))):
        return None
    return left, right


def support_counts(
    seeds: np.ndarray,
    ys0: np.ndarray,
    cand: np.ndarray,
    nbits: int,
    d_prime: int,
) -> np.ndarray:
    """Exact support counts for every candidate row."""
    if d_prime > MAX_BUCKETS:
        raise ValueError(f"bucket count {d_prime} exceeds {MAX_BUCKETS}")
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    ys0 = np.ascontiguousarray(ys0, dtype=np.uint8)
    cand = np.ascontiguousarray(cand, dtype=np.uint8)
    work = seeds.shape[0] * cand.shape[0]
    if d_prime <= 16 and work >= 2e8:
        split = _find_product_split(cand, nbits)
        if split is not None:
            return _support_counts_product(seeds, ys0, split[0], split[1], nbits, d_prime)
    return _support_counts_loop(seeds, ys0, cand, nbits, d_prime)
