"""Deterministic random-stream derivation.

Every stochastic routine in the library derives its generator from a master
seed plus a structured path (experiment name, SNR index, trial index, ...).
The derivation is a stable hash, independent of execution order, thread
count, and PYTHONHASHSEED, so identical seeds reproduce identical draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["spawn_seed_sequence", "spawn_rng"]


def _entropy_word(item) -> int:
    if isinstance(item, (int, np.integer)):
        return int(item) & 0xFFFFFFFFFFFFFFFF
    if isinstance(item, str):
        digest = hashlib.sha256(item.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"seed path elements must be int or str, got {type(item)!r}")


def spawn_seed_sequence(master_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence keyed by the master seed and a path of ints/strings."""
    entropy = [_entropy_word(master_seed)] + [_entropy_word(p) for p in path]
    return np.random.SeedSequence(entropy)


def spawn_rng(master_seed: int, *path) -> np.random.Generator:
    """Fresh Generator for the given (master seed, path) pair."""
    return np.random.default_rng(spawn_seed_sequence(master_seed, *path))
