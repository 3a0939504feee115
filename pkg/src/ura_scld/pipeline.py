"""End-to-end decoders: isolated AD + tree decoding, and SCLD.

Both decoders draw the per-slot coordinate order from the same named stream
(``streams.COORD_ORDER`` under ``seed``), so on identical supports they run
identical coordinate descent.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


from . import streams
from .activity_detection import ADConfig, coordinate_descent, select_fragments
from .channel import SlotObservation
from .codebook import Codebook, admissible_support, full_support
from .tree_code import (
    DEFAULT_WIDTH_CAP,
    ParityGenerators,
    ParityPatternSet,
    PathList,
    extend_paths,
    finalize_paths,
    grow_tree,
    permissible_parities,
    unique_survivors,
)


@dataclass
class DecodeResult:
    mode: str
    recovered: list
    support_sizes: list = field(default_factory=list)
    pattern_counts: list = field(default_factory=list)
    slot_times: list = field(default_factory=list)
    path_counts: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    tree_time: float = 0.0
    died_at: Optional[int] = None
    ambiguous_roots: int = 0

    @property
    def seconds(self) -> float:
        return float(sum(self.slot_times) + self.tree_time)

    def support_law_holds(self, profile) -> bool:
        """Every measured support size equals ``2**w_l * |P_l|``."""
        return all(
            s == (1 << profile.info[l]) * c
            for l, (s, c) in enumerate(zip(self.support_sizes, self.pattern_counts))
        )


def _detect(obs, codebook, support, ka, config, N0, seed, slot):
    rng = streams.generator(seed, streams.COORD_ORDER, slot)
    est = coordinate_descent(obs.cov, codebook, support, config, N0, rng)
    return est.gamma, select_fragments(est.gamma, ka, config.delta)


def decode_baseline(
    observations: Sequence[SlotObservation],
    codebooks: Sequence[Codebook],
    gens: ParityGenerators,
    ka: int,
    config: ADConfig = ADConfig(),
    N0: float = 1.0,
    seed=0,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> DecodeResult:
    """AD over the full codebook in every slot, then tree decoding."""
    prof = gens.profile
    res = DecodeResult("baseline", [])
    lists = []
    for slot in range(prof.L):
        t0 = time.perf_counter()
        support = full_support(slot, prof.lengths[slot])
        gamma, sel = _detect(observations[slot], codebooks[slot], support, ka, config, N0, seed, slot)
        res.slot_times.append(time.perf_counter() - t0)
        res.support_sizes.append(len(support))
        res.pattern_counts.append(1 << prof.parity[slot])
        res.selected.append(sel[0])
        res.gammas.append(gamma)
        lists.append(sel)

    t0 = time.perf_counter()
    paths, counts = grow_tree(lists, gens, width_cap)
    unique = unique_survivors(paths)
    res.recovered = finalize_paths(unique, ka)
    res.ambiguous_roots = int(np.unique(paths.roots).size - np.unique(unique.roots).size)
    res.tree_time = time.perf_counter() - t0
    res.path_counts = counts
    if not len(paths):
        res.died_at = next(i for i, c in enumerate(counts) if c == 0)
    return res


def decode_scld(
    observations: Sequence[SlotObservation],
    codebooks: Sequence[Codebook],
    gens: ParityGenerators,
    ka: int,
    config: ADConfig = ADConfig(),
    N0: float = 1.0,
    seed=0,
    width_cap: int = DEFAULT_WIDTH_CAP,
    saturate: bool = False,
) -> DecodeResult:
    """Slot-by-slot AD restricted to columns reachable from active paths.

    ``saturate=True`` admits every parity pattern at every slot, which
    removes the pruning but keeps the interleaved schedule.
    """
    prof = gens.profile
    res = DecodeResult("scld", [])

    t0 = time.perf_counter()
    support = full_support(0, prof.lengths[0])
    gamma, (idx, sc) = _detect(observations[0], codebooks[0], support, ka, config, N0, seed, 0)
    paths = PathList.from_roots(idx, sc, prof)
    res.slot_times.append(time.perf_counter() - t0)
    res.support_sizes.append(len(support))
    res.pattern_counts.append(1)
    res.selected.append(idx)
    res.gammas.append(gamma)
    res.path_counts.append(len(paths))

    for slot in range(1, prof.L):
        if not len(paths):
            res.died_at = slot - 1
            return res
        t0 = time.perf_counter()
        if saturate:
            patterns = ParityPatternSet.full(slot, prof.parity[slot])
        else:
            patterns = permissible_parities(paths, gens)
        support = admissible_support(patterns, prof.info[slot])
        gamma, (idx, sc) = _detect(observations[slot], codebooks[slot], support, ka, config, N0, seed, slot)
        paths = extend_paths(paths, idx, sc, gens, width_cap)
        res.slot_times.append(time.perf_counter() - t0)
        res.support_sizes.append(len(support))
        res.pattern_counts.append(len(patterns))
        res.selected.append(idx)
        res.gammas.append(gamma)
        res.path_counts.append(len(paths))

    if not len(paths):
        res.died_at = prof.L - 1
        return res
    t0 = time.perf_counter()
    res.recovered = finalize_paths(paths, ka)
    res.tree_time = time.perf_counter() - t0
    return res


def decode(mode: str, *args, **kwargs) -> DecodeResult:
    if mode == "baseline":
        kwargs.pop("saturate", None)
        return decode_baseline(*args, **kwargs)
    if mode == "scld":
        return decode_scld(*args, **kwargs)
    raise ValueError(f"unknown decoder mode {mode!r}")
