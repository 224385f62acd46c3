"""Seeded random streams. Every draw in the system flows from one root seed."""

from __future__ import annotations

import hashlib

import numpy as np

from .tensor import Tensor


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed, *keys):
    """Independent deterministic generator for (seed, keys).

    Same arguments give a bitwise-identical stream; different key tuples give
    statistically independent streams (SeedSequence hashing).
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def gaussian_sample(rng, n, dtype=np.float32):
    """n i.i.d. standard-normal draws as a Tensor."""
    draws = rng.standard_normal(int(n))
    return Tensor(draws.astype(dtype, copy=False))
