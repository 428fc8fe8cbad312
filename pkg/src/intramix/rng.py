"""Deterministic random streams.

Every stochastic component in this package draws from a Philox 4x64
counter-based generator.  Streams are derived from a single integer seed
plus a key path (ints or strings), so independent parts of a pipeline
get independent, reproducible streams regardless of call order or
thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "key_to_int"]


def key_to_int(part: int | str) -> int:
    """Map a stream-key component to a stable non-negative integer.

    Integers pass through (must be non-negative); strings are hashed with
    SHA-256 so the mapping is identical across platforms and sessions.
    """
    if isinstance(part, bool):
        raise TypeError("bool is not a valid stream key component")
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"stream key ints must be non-negative, got {part}")
        return part
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Return the Philox generator for ``seed`` at stream path ``key``.

    The same (seed, key) always yields the same stream; distinct keys
    yield statistically independent streams of the same seed.
    """
    spawn_key = tuple(key_to_int(k) for k in key)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))
