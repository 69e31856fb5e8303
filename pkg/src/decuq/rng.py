"""Splittable, reproducible random number streams.

Every source of randomness in the package is derived from a single
64-bit seed through an explicit stream path, so results are identical
across runs and independent of evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeededRng:
    """A (seed, stream-path) pair identifying one independent stream.

    ``child(i, j, ...)`` derives a sub-stream deterministically; the
    same path always yields the same draws regardless of how many
    other streams were consumed.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *indices: int) -> "SeededRng":
        return SeededRng(self.seed, self.path + tuple(indices))

    def generator(self) -> np.random.Generator:
        """Fresh counter-based generator for this stream.

        Each call restarts the stream; create one generator per scope
        and consume it sequentially.
        """
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))
