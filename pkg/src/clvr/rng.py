"""Deterministic, parallelism-independent random streams.

Every stochastic component draws from a stream addressed by a master seed
plus a path of labels, e.g. ``stream(seed, "episode", 17, "gen")``. Streams
with different paths are statistically independent, and a stream's output
depends only on (seed, path) — never on execution order — so datasets are
bit-identical whether episodes run serially or across a thread pool.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(part) -> int:
    """Map one path element to a 64-bit spawn-key word."""
    if isinstance(part, bool):
        raise TypeError("bool is ambiguous as a stream path element")
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"negative path element {part}")
        return part & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream path elements must be int or str, got {type(part)!r}")


def sequence(master_seed: int, *path) -> np.random.SeedSequence:
    """The seed sequence addressed by (master_seed, path)."""
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    return np.random.SeedSequence(
        master_seed & _MASK64, spawn_key=tuple(_key(p) for p in path)
    )


def stream(master_seed: int, *path) -> np.random.Generator:
    """A generator whose output depends only on (master_seed, path)."""
    return np.random.default_rng(sequence(master_seed, *path))


def child_seed(master_seed: int, *path) -> int:
    """A 64-bit seed derived from (master_seed, path), for nested components."""
    words = sequence(master_seed, *path).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)
