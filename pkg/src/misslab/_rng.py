"""Deterministic labeled substreams.

Every parallel unit (trial, imputation copy, bootstrap resample) derives its
generator from the base seed plus a tuple of integer labels, so results do
not depend on scheduling or on which other units ran.
"""

from __future__ import annotations

import numpy as np

# labels for the per-trial child streams
GEN, INJECT, MICE, BOOT = 0, 1, 2, 3


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass a seed or SeedSequence, not a Generator")
    return np.random.SeedSequence(seed)


def child(seed, *labels: int) -> np.random.SeedSequence:
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(labels))


def rng(seed, *labels: int) -> np.random.Generator:
    return np.random.default_rng(child(seed, *labels))


def describe(seed) -> dict:
    ss = seed_sequence(seed)
    return {"entropy": int(ss.entropy), "spawn_key": list(ss.spawn_key)}
