"""Reproducible random streams for seeded, parallel Monte Carlo."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A named, replayable source of randomness.

    A stream is identified by a master seed plus a tuple of child indices.
    Deriving a child extends the tuple, so independent consumers (samples,
    batches, workers) can each be handed their own stream without sharing
    generator state.  The draws produced by a given ``(seed, key)`` pair do
    not depend on scheduling, thread count, or the order in which sibling
    streams are consumed.
    """

    seed: int
    key: tuple[int, ...] = ()

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.seed, self.key + indices)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(seq))
