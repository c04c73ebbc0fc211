"""Collision-safe derived seeds for independent trials.

Each trial's seed is the 128-bit BLAKE2b hash of "base:experiment:index",
so trials are reproducible in isolation, independent of worker scheduling,
and distinct across experiments sharing one base seed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["trial_seed", "trial_rng", "seed_hex"]


def trial_seed(base_seed: int, experiment: str, index: int) -> np.random.SeedSequence:
    digest = hashlib.blake2b(
        f"{base_seed}:{experiment}:{index}".encode(), digest_size=16).digest()
    return np.random.SeedSequence(int.from_bytes(digest, "big"))


def trial_rng(base_seed: int, experiment: str, index: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(base_seed, experiment, index))


def seed_hex(base_seed: int, experiment: str, index: int) -> str:
    """Hex form of the derived 128-bit seed, for manifests."""
    return hashlib.blake2b(
        f"{base_seed}:{experiment}:{index}".encode(), digest_size=16).hexdigest()
