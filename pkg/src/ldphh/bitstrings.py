"""Fixed-length bit-string values and packed byte-matrix helpers.

Values are MSB-first bit strings of a declared length.  A single value is a
``BitValue``; bulk data (datasets, candidate domains) is held as a numpy
``uint8`` matrix with one row per value, ``ceil(nbits/8)`` columns, and any
trailing pad bits in the last byte set to zero.  Row order in extended
domains is prefix-major, extension-minor; aggregation relies on that layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def num_bytes(nbits: int) -> int:
    """Bytes needed to hold ``nbits`` bits."""
    return (nbits + 7) // 8


def hex_width(nbits: int) -> int:
    """Hex digits needed to hold ``nbits`` bits."""
    return (nbits + 3) // 4


@dataclass(frozen=True, order=True)
class BitValue:
    """An m-bit value, MSB-first: bit 0 of the string is the highest bit."""

    bits: int
    m: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("bit length must be >= 0")
        if not 0 <= self.bits < (1 << self.m):
            raise ValueError(f"value {self.bits} does not fit in {self.m} bits")

    def prefix(self, length: int) -> "BitValue":
        """The ``length`` high-order bits as a new value (0 gives the empty string)."""
        if not 0 <= length <= self.m:
            raise ValueError(f"prefix length {length} outside 0..{self.m}")
        return BitValue(self.bits >> (self.m - length) if length else 0, length)

    def extend(self, suffix: int, width: int) -> "BitValue":
        """Append ``width`` bits holding ``suffix`` after the current bits."""
        if width < 1 or not 0 <= suffix < (1 << width):
            raise ValueError("suffix does not fit in the extension width")
        return BitValue((self.bits << width) | suffix, self.m + width)

    def key_bytes(self) -> bytes:
        """Packed MSB-first bytes, pad bits zeroed."""
        nb = num_bytes(self.m)
        return (self.bits << (nb * 8 - self.m)).to_bytes(nb, "big")

    def to_hex(self) -> str:
        """Zero-padded hex of the value, ``ceil(m/4)`` digits."""
        return format(self.bits, f"0{hex_width(self.m)}x")

    @classmethod
    def from_hex(cls, text: str, m: int) -> "BitValue":
        return cls(int(text, 16), m)


def ints_to_matrix(values: Sequence[int] | np.ndarray, nbits: int) -> np.ndarray:
    """Pack integers (bit-string encodings) into a byte matrix."""
    nb = num_bytes(nbits)
    if nbits <= 64:
        arr = np.asarray(values, dtype=np.uint64)
        msb_aligned = arr << np.uint64(64 - nbits)
        shifts = np.uint64(56) - np.uint64(8) * np.arange(nb, dtype=np.uint64)
        return ((msb_aligned[:, None] >> shifts[None, :]) & np.uint64(0xFF)).astype(np.uint8)
    rows = [
        (int(v) << (nb * 8 - nbits)).to_bytes(nb, "big") for v in values
    ]
    return np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(len(rows), nb).copy()


def matrix_to_ints(mat: np.ndarray, nbits: int) -> list[int]:
    """Inverse of ints_to_matrix."""
    nb = num_bytes(nbits)
    pad = nb * 8 - nbits
    data = mat.astype(np.uint8, copy=False).tobytes()
    return [int.from_bytes(data[i * nb : (i + 1) * nb], "big") >> pad for i in range(mat.shape[0])]


def matrix_to_hex(mat: np.ndarray, nbits: int) -> list[str]:
    width = hex_width(nbits)
    return [format(v, f"0{width}x") for v in matrix_to_ints(mat, nbits)]


def matrix_to_uint64(mat: np.ndarray, nbits: int) -> np.ndarray:
    """Vectorized matrix_to_ints for values of at most 64 bits."""
    if nbits > 64:
        raise ValueError(f"values of {nbits} bits do not fit in uint64")
    nb = num_bytes(nbits)
    acc = np.zeros(mat.shape[0], dtype=np.uint64)
    for i in range(nb):
        acc |= mat[:, i].astype(np.uint64) << np.uint64(8 * (nb - 1 - i))
    return acc >> np.uint64(8 * nb - nbits)


def slice_matrix(mat: np.ndarray, nbits: int, start: int, width: int) -> np.ndarray:
    """Per-row slice of ``width`` bits starting at string position ``start``."""
    if width < 1 or start < 0 or start + width > nbits:
        raise ValueError(
            f"slice [{start}, {start + width}) outside a {nbits}-bit string"
        )
    if start % 8 == 0 and width % 8 == 0:
        return np.ascontiguousarray(mat[:, start // 8 : (start + width) // 8])
    if nbits <= 64:
        ints = matrix_to_uint64(mat, nbits)
        seg = (ints >> np.uint64(nbits - start - width)) & np.uint64((1 << width) - 1)
        return ints_to_matrix(seg, width)
    values = matrix_to_ints(mat, nbits)
    mask = (1 << width) - 1
    seg = [(v >> (nbits - start - width)) & mask for v in values]
    return ints_to_matrix(seg, width)


def prefix_matrix(mat: np.ndarray, plen: int) -> np.ndarray:
    """Per-row prefix of ``plen`` bits: leading bytes with pad bits zeroed."""
    nb = num_bytes(plen)
    out = mat[:, :nb].copy()
    rem = plen % 8
    if rem:
        out[:, -1] &= np.uint8((0xFF << (8 - rem)) & 0xFF)
    return out


def extend_matrix(prefixes: np.ndarray, plen: int, add: int) -> np.ndarray:
    """Cross every prefix row with every ``add``-bit extension.

    Output has ``P * 2**add`` rows, prefix-major and extension-minor, each
    ``plen + add`` bits long.
    """
    new_len = plen + add
    nb_new = num_bytes(new_len)
    n_ext = 1 << add
    # Extension bits occupy string positions plen .. plen+add-1.
    ext_ints = np.arange(n_ext, dtype=np.uint64) if nb_new * 8 <= 64 else range(n_ext)
    if nb_new * 8 <= 64:
        ext_rows = ints_to_matrix(ext_ints << np.uint64(nb_new * 8 - new_len), nb_new * 8)
    else:
        ext_rows = ints_to_matrix([e << (nb_new * 8 - new_len) for e in ext_ints], nb_new * 8)
    padded = np.zeros((prefixes.shape[0], nb_new), dtype=np.uint8)
    padded[:, : prefixes.shape[1]] = prefixes
    out = np.repeat(padded, n_ext, axis=0)
    out |= np.tile(ext_rows, (prefixes.shape[0], 1))
    return out


def order_rows(mat: np.ndarray, estimates: np.ndarray) -> np.ndarray:
    """Row indices sorted by (estimate descending, value ascending)."""
    keys = tuple(mat[:, col] for col in range(mat.shape[1] - 1, -1, -1))
    return np.lexsort(keys + (-np.asarray(estimates, dtype=np.float64),))


def unique_rows_with_counts(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows and their multiplicities, rows in ascending value order."""
    if mat.shape[0] == 0:
        return mat.copy(), np.zeros(0, dtype=np.int64)
    view = np.ascontiguousarray(mat).view(
        np.dtype((np.void, mat.dtype.itemsize * mat.shape[1]))
    ).ravel()
    uniq, counts = np.unique(view, return_counts=True)
    rows = uniq.view(mat.dtype).reshape(-1, mat.shape[1])
    return rows, counts.astype(np.int64)


def rows_from_bitvalues(values: Iterable[BitValue], m: int) -> np.ndarray:
    vals = list(values)
    for v in vals:
        if v.m != m:
            raise ValueError(f"expected {m}-bit values, got {v.m}")
    return ints_to_matrix([v.bits for v in vals], m)
