"""
Counter-based random streams.

A run has one 64-bit master seed. Every random draw in the engines comes from a
stream keyed by ``(node, round, purpose)``: the stream is a numpy Generator seeded
from ``SeedSequence(entropy=master, spawn_key=(node, round, purpose))``. Run-level
draws (initial values, synthetic data) use ``spawn_key=(purpose,)``.

Because a stream depends only on its key, per-node engines, the matrix-form
oracle and any intra-round parallelism all replay identical randomness no matter
in which order nodes are processed.
"""

import enum

import numpy as np

MASK_64 = (1 << 64) - 1


class Purpose(enum.IntEnum):
    QUANTIZE = 1
    GRADIENT = 2
    INIT = 3
    DATA = 4
    DIAGNOSTIC = 5


class SeedStreams:
    """Factory for per-(node, round, purpose) generators of one run."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed) & MASK_64

    def for_node(self, node: int, round_index: int, purpose: Purpose) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(int(node), int(round_index), int(purpose)),
        )
        return np.random.default_rng(seq)

    def global_stream(self, purpose: Purpose) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(int(purpose),))
        return np.random.default_rng(seq)

    def __repr__(self) -> str:
        return f"SeedStreams(master_seed={self.master_seed})"
