"""Outer tree code: payload fragmentation, GF(2) parity, and tree decoding.

Sub-block ``l`` carries ``w_l`` information bits followed by ``p_l`` parity
bits, where the parity is a random binary linear function of all earlier
information bits.  The decoder stitches per-slot fragment lists back into
messages by walking a tree from every slot-0 fragment and discarding branches
whose parity does not match.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import streams
from .bits import rows_to_bits, rows_to_int
from .errors import InvalidGenerator, InvalidPayload

DEFAULT_WIDTH_CAP = 2**16


@dataclass(frozen=True)
class ParityProfile:
    """Per-slot split of sub-blocks into information and parity bits.

    ``parity[l]`` is the number of parity bits in slot ``l`` and ``lengths[l]``
    the total sub-block length; the information length is their difference.
    """

    parity: tuple[int, ...]
    lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parity", tuple(int(p) for p in self.parity))
        object.__setattr__(self, "lengths", tuple(int(v) for v in self.lengths))
        if len(self.parity) != len(self.lengths) or not self.parity:
            raise ValueError("parity and lengths must be non-empty and of equal length")
        if self.parity[0] != 0:
            raise ValueError("the first sub-block carries no parity bits")
        if any(v < 1 for v in self.lengths):
            raise ValueError("sub-block lengths must be positive")
        if any(p < 0 or p > v for p, v in zip(self.parity, self.lengths)):
            raise ValueError("parity length must lie in [0, sub-block length]")
        if max(self.lengths) > 62:
            raise ValueError("sub-blocks longer than 62 bits are not supported")

    @classmethod
    def uniform(cls, parity: Sequence[int], length: int) -> "ParityProfile":
        return cls(tuple(parity), (length,) * len(parity))

    @classmethod
    def default(cls) -> "ParityProfile":
        """32 slots of 12-bit sub-blocks, parity (0, 9 x 28, 12, 12, 12)."""
        return cls.uniform((0,) + (9,) * 28 + (12,) * 3, 12)

    @property
    def L(self) -> int:
        return len(self.parity)

    @property
    def info(self) -> tuple[int, ...]:
        return tuple(v - p for v, p in zip(self.lengths, self.parity))

    @property
    def B(self) -> int:
        return sum(self.info)

    @property
    def offsets(self) -> np.ndarray:
        """Start of each slot's information segment inside the payload."""
        return np.concatenate([[0], np.cumsum(self.info)]).astype(int)


@dataclass(frozen=True)
class ParityGenerators:
    """Binary matrices ``G[j, l]`` of shape ``w_j x p_l`` for ``j < l``.

    Stored per slot as the vertical stack over ``j`` so that the parity of
    slot ``l`` is ``prefix @ stacked[l] mod 2`` with ``prefix`` the first
    ``offsets[l]`` payload bits.
    """

    profile: ParityProfile
    stacked: tuple[np.ndarray, ...]

    def __post_init__(self):
        prof = self.profile
        if len(self.stacked) != prof.L:
            raise InvalidGenerator(f"expected {prof.L} slot generators, got {len(self.stacked)}")
        for l, g in enumerate(self.stacked):
            shape = (int(prof.offsets[l]), prof.parity[l])
            if g.shape != shape:
                raise InvalidGenerator(f"slot {l}: generator shape {g.shape}, expected {shape}")
            if g.size and not np.isin(g, (0, 1)).all():
                raise InvalidGenerator(f"slot {l}: generator entries must be 0/1")

    @classmethod
    def generate(cls, profile: ParityProfile, seed) -> "ParityGenerators":
        rng = streams.generator(seed, streams.GENERATORS)
        stacked = tuple(
            rng.integers(0, 2, size=(int(profile.offsets[l]), profile.parity[l]), dtype=np.uint8)
            for l in range(profile.L)
        )
        return cls(profile, stacked)

    @classmethod
    def from_blocks(cls, profile: ParityProfile, blocks: dict) -> "ParityGenerators":
        """Assemble from explicit ``{(j, l): G_jl}`` blocks; missing blocks are zero."""
        stacked = []
        for l in range(profile.L):
            rows = []
            for j in range(l):
                g = np.asarray(blocks.get((j, l), np.zeros((profile.info[j], profile.parity[l]))), dtype=np.uint8)
                if g.shape != (profile.info[j], profile.parity[l]):
                    raise InvalidGenerator(f"G[{j},{l}] has shape {g.shape}")
                rows.append(g)
            stacked.append(np.vstack(rows) if rows else np.zeros((0, profile.parity[l]), dtype=np.uint8))
        return cls(profile, tuple(stacked))

    def block(self, j: int, l: int) -> np.ndarray:
        off = self.profile.offsets
        return self.stacked[l][off[j]:off[j + 1]]


def _check_payload(payload, profile: ParityProfile) -> np.ndarray:
    bits = np.asarray(payload)
    if bits.ndim != 1 or bits.size != profile.B:
        raise InvalidPayload(f"payload must have {profile.B} bits, got shape {bits.shape}")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise InvalidPayload("payload entries must be 0/1")
    return bits.astype(np.uint8)


def split_payload(payload, profile: ParityProfile) -> list[np.ndarray]:
    bits = _check_payload(payload, profile)
    off = profile.offsets
    return [bits[off[l]:off[l + 1]] for l in range(profile.L)]


def parity_values(prefixes: np.ndarray, gens: ParityGenerators, slot: int) -> np.ndarray:
    """Integer parity pattern of slot ``slot`` for each row of ``prefixes``.

    ``prefixes`` holds (at least) the first ``offsets[slot]`` payload bits of
    every path or message.
    """
    g = gens.stacked[slot]
    prefixes = np.asarray(prefixes)[:, : g.shape[0]]
    bits = (prefixes.astype(np.int64) @ g.astype(np.int64)) & 1
    return rows_to_int(bits)


def compute_parity(path_info: Sequence, gens: ParityGenerators, slot: int) -> np.ndarray:
    """Parity bits ``p(slot) = sum_j w(j) G[j, slot]`` over GF(2)."""
    prof = gens.profile
    if not 1 <= slot < prof.L:
        raise InvalidGenerator(f"slot must lie in [1, {prof.L}), got {slot}")
    if len(path_info) < slot:
        raise InvalidGenerator(f"need {slot} information fragments, got {len(path_info)}")
    acc = np.zeros(prof.parity[slot], dtype=np.int64)
    for j in range(slot):
        w = np.asarray(path_info[j], dtype=np.int64)
        if w.shape != (prof.info[j],):
            raise InvalidGenerator(f"fragment {j} has length {w.size}, expected {prof.info[j]}")
        acc += w @ gens.block(j, slot)
    return (acc & 1).astype(np.uint8)


def encode_outer(payload, gens: ParityGenerators) -> list[np.ndarray]:
    """Coded sub-blocks ``w(l) || p(l)`` for one payload."""
    info = split_payload(payload, gens.profile)
    out = [info[0].copy()]
    for l in range(1, gens.profile.L):
        out.append(np.concatenate([info[l], compute_parity(info, gens, l)]))
    return out


def encode_indices(payloads: np.ndarray, gens: ParityGenerators) -> np.ndarray:
    """Column index ``[v(l)]_2`` of every sub-block, shape ``(K, L)``.

    Vectorised equivalent of mapping ``encode_outer`` through the radix-2 map.
    """
    prof = gens.profile
    payloads = np.atleast_2d(np.asarray(payloads, dtype=np.uint8))
    if payloads.shape[1] != prof.B:
        raise InvalidPayload(f"payloads must have {prof.B} columns")
    off = prof.offsets
    idx = np.empty((payloads.shape[0], prof.L), dtype=np.int64)
    for l in range(prof.L):
        info = rows_to_int(payloads[:, off[l]:off[l + 1]])
        par = parity_values(payloads, gens, l) if l else 0
        idx[:, l] = (info << prof.parity[l]) | par
    return idx


@dataclass(frozen=True)
class ParityPatternSet:
    """Distinct parity patterns of one slot, as sorted integers ``[p]_2``."""

    slot: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.unique(np.asarray(self.values, dtype=np.int64))
        if vals.size and (vals[0] < 0 or vals[-1] >= 1 << self.width):
            raise ValueError("pattern value out of range")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_bits(cls, slot: int, patterns) -> "ParityPatternSet":
        patterns = np.atleast_2d(np.asarray(patterns, dtype=np.uint8))
        return cls(slot, patterns.shape[1], rows_to_int(patterns))

    @classmethod
    def full(cls, slot: int, width: int) -> "ParityPatternSet":
        return cls(slot, width, np.arange(1 << width))

    @property
    def patterns(self) -> np.ndarray:
        return rows_to_bits(self.values, self.width)

    def __len__(self):
        return int(self.values.size)


@dataclass
class PathList:
    """Active paths of the decoding tree through ``stage``.

    Row ``i`` describes one path: its information bits so far, the column
    index of each of its fragments, the summed detector score, and the slot-0
    fragment (root) it grew from.
    """

    stage: int
    info: np.ndarray
    fragments: np.ndarray
    scores: np.ndarray
    roots: np.ndarray
    failed_roots: frozenset = field(default_factory=frozenset)

    def __len__(self):
        return int(self.scores.size)

    @classmethod
    def from_roots(cls, indices, scores, profile: ParityProfile) -> "PathList":
        indices = np.asarray(indices, dtype=np.int64)
        return cls(
            stage=0,
            info=rows_to_bits(indices >> profile.parity[0], profile.info[0]),
            fragments=indices[:, None].copy(),
            scores=np.asarray(scores, dtype=float).copy(),
            roots=np.arange(indices.size),
        )


def extend_paths(
    paths: PathList,
    indices,
    scores,
    gens: ParityGenerators,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> PathList:
    """Attach every parity-consistent fragment of the next slot to every path.

    Output rows are ordered by (path, fragment).  A root whose path count
    would exceed ``width_cap`` loses all its paths and is recorded in
    ``failed_roots``.
    """
    prof = gens.profile
    slot = paths.stage + 1
    indices = np.asarray(indices, dtype=np.int64)
    scores = np.asarray(scores, dtype=float)
    p = prof.parity[slot]
    expected = parity_values(paths.info, gens, slot) if len(paths) else np.zeros(0, np.int64)
    frag_par = indices & ((1 << p) - 1)
    pi, fj = np.nonzero(expected[:, None] == frag_par[None, :])

    roots = paths.roots[pi]
    failed = set(paths.failed_roots)
    if pi.size > width_cap:
        ids, counts = np.unique(roots, return_counts=True)
        over = ids[counts > width_cap]
        if over.size:
            failed.update(int(r) for r in over)
            keep = ~np.isin(roots, over)
            pi, fj, roots = pi[keep], fj[keep], roots[keep]

    new_info = rows_to_bits(indices[fj] >> p, prof.info[slot])
    return PathList(
        stage=slot,
        info=np.hstack([paths.info[pi], new_info]),
        fragments=np.hstack([paths.fragments[pi], indices[fj, None]]),
        scores=paths.scores[pi] + scores[fj],
        roots=roots,
        failed_roots=frozenset(failed),
    )


def permissible_parities(paths: PathList, gens: ParityGenerators) -> ParityPatternSet:
    """Parity patterns reachable at the next slot from any active path."""
    slot = paths.stage + 1
    vals = parity_values(paths.info, gens, slot) if len(paths) else np.zeros(0, np.int64)
    return ParityPatternSet(slot, gens.profile.parity[slot], vals)


def unique_survivors(paths: PathList) -> PathList:
    """Keep only paths that are the sole survivor of their root."""
    ids, counts = np.unique(paths.roots, return_counts=True)
    good = ids[counts == 1]
    if paths.failed_roots:
        good = good[~np.isin(good, list(paths.failed_roots))]
    keep = np.isin(paths.roots, good)
    return PathList(
        paths.stage, paths.info[keep], paths.fragments[keep], paths.scores[keep],
        paths.roots[keep], paths.failed_roots,
    )


def finalize_paths(paths: PathList, ka: int) -> list[np.ndarray]:
    """Distinct payloads ranked by descending score, at most ``ka`` of them."""
    order = np.argsort(-paths.scores, kind="stable")
    seen, out = set(), []
    for i in order:
        if len(out) >= ka:
            break
        key = paths.info[i].tobytes()
        if key not in seen:
            seen.add(key)
            out.append(paths.info[i].copy())
    return out


def grow_tree(
    fragment_lists: Sequence[tuple],
    gens: ParityGenerators,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> tuple[PathList, list[int]]:
    """Run every root through all slots.  Returns final paths and per-stage counts."""
    idx0, sc0 = fragment_lists[0]
    paths = PathList.from_roots(idx0, sc0, gens.profile)
    counts = [len(paths)]
    for slot in range(1, gens.profile.L):
        idx, sc = fragment_lists[slot]
        paths = extend_paths(paths, idx, sc, gens, width_cap)
        counts.append(len(paths))
    return paths, counts


def tree_decode_baseline(
    fragment_lists: Sequence[tuple],
    gens: ParityGenerators,
    ka: int,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> list[np.ndarray]:
    """Isolated tree decoding: a root yields a message only if exactly one path survives."""
    paths, _ = grow_tree(fragment_lists, gens, width_cap)
    return finalize_paths(unique_survivors(paths), ka)
