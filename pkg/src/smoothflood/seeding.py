"""Reproducible per-trial random streams.

A trial's generator depends only on the base seed, the cell key and the
trial index, so results do not change with execution order or worker
count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def cell_words(cell_key: str) -> tuple[int, int]:
    """Two 32-bit words from the SHA-256 of ``cell_key``."""
    digest = hashlib.sha256(cell_key.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:8], "little")


def trial_seed(base_seed: int, cell_key: str, trial: int, stream: int = 0) -> np.random.SeedSequence:
    if not 0 <= base_seed < 2**64:
        raise ValueError("base seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(base_seed, spawn_key=(*cell_words(cell_key), trial, stream))


def trial_rng(base_seed: int, cell_key: str, trial: int, stream: int = 0):
    """``(generator, lineage)`` for one trial."""
    seq = trial_seed(base_seed, cell_key, trial, stream)
    return np.random.default_rng(seq), (base_seed, cell_key, trial, stream)
