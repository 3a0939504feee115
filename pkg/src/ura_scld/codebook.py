"""Inner code: per-slot spherical codebooks and SCLD column pruning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import streams
from .bits import to_int
from .tree_code import ParityPatternSet


@dataclass(frozen=True)
class Codebook:
    slot: int
    columns: np.ndarray
    power: float

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def size(self) -> int:
        return self.columns.shape[1]


def generate_codebook(seed, n: int, v: int, power: float, slot: int = 0) -> Codebook:
    """``n x 2**v`` matrix with columns uniform on the complex sphere of radius sqrt(n P)."""
    if n < 1 or v < 1 or power <= 0:
        raise ValueError("need n >= 1, v >= 1 and power > 0")
    rng = streams.generator(seed, streams.CODEBOOK, slot)
    shape = (n, 1 << v)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    a *= np.sqrt(n * power) / np.linalg.norm(a, axis=0)
    return Codebook(slot, a, float(power))


def subblock_index(bits) -> int:
    """``[v]_2`` with the first bit most significant."""
    return to_int(bits)


@dataclass(frozen=True)
class SupportSet:
    slot: int
    indices: np.ndarray

    def __len__(self):
        return int(self.indices.size)


def admissible_support(patterns: ParityPatternSet, info_bits: int) -> SupportSet:
    """All columns ``[w || p]_2`` with ``w`` free and ``p`` drawn from ``patterns``.

    With MSB-first indexing the index is ``[w]_2 * 2**p_len + [p]_2``, so the
    set is a sorted outer sum and has exactly ``2**info_bits * len(patterns)``
    entries.
    """
    heads = np.arange(1 << info_bits, dtype=np.int64) << patterns.width
    idx = (heads[:, None] + patterns.values[None, :]).ravel()
    return SupportSet(patterns.slot, idx)


def full_support(slot: int, v: int) -> SupportSet:
    return SupportSet(slot, np.arange(1 << v, dtype=np.int64))
