"""Named, independent random streams derived from one experiment seed.

Every stream is a ``SeedSequence`` child identified by a tag plus integer
coordinates, so draws never depend on the order in which streams are used.
That is what lets the baseline and list decoders see bit-identical
observations, and what makes trial ``t`` reproducible on its own.
"""
import numpy as np

CODEBOOK = 1
GENERATORS = 2
PAYLOADS = 3
CHANNEL = 4
COORD_ORDER = 5


def seed_sequence(seed, tag: int, *coords: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (tag, *coords))
    return np.random.SeedSequence(int(seed), spawn_key=(tag, *coords))


def generator(seed, tag: int, *coords: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, tag, *coords))
