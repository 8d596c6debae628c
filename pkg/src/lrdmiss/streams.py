"""Keyed random streams.

Every random draw in the package comes from ``stream(seed, *keys)``: a Philox
generator seeded by a :class:`numpy.random.SeedSequence` whose spawn key is the
tuple of integer keys. Two calls with the same ``(seed, keys)`` give the same
stream no matter the call order or which process makes them.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

# Stream-purpose tags; the first spawn-key component of every harness stream.
SIMULATE = 1
MASK = 2
IMPUTE = 3


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *keys)``."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return stream(0 if seed is None else int(seed))


def text_key(text: str) -> int:
    """Stable 63-bit integer key for a string (used to key streams by model)."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def proportion_key(proportion: float) -> int:
    return int(round(proportion * 10_000))
