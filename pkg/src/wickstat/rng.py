"""Reproducible random-number streams for parallel Monte Carlo.

Streams are counter-based (Philox) and keyed by (master seed, index path),
so replica r of experiment e always sees the same draws no matter how the
work is chunked across processes.  All samplers draw in a documented fixed
order; consuming the same shapes in the same order is what makes whole-path
prefetching equivalent to per-step draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible stream: same (seed, index) -> same draws."""

    master_seed: int
    index: tuple = ()

    def child(self, *more) -> "RngStream":
        return RngStream(self.master_seed, self.index + tuple(int(i) for i in more))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence((int(self.master_seed),) + self.index)
        return np.random.Generator(np.random.Philox(seq))
