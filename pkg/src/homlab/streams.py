"""Counter-keyed random streams.

Every random draw in the toolkit comes from a :class:`Stream`, i.e. a master
seed plus a tuple of integer keys (delay index, block index, ...).  The keyed
generator is a Philox counter generator, so the i-th value drawn from
``Stream(seed, key)`` depends only on ``(seed, key, i)`` and never on which
worker evaluated it or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Stream:
    seed: int
    key: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if any(k < 0 for k in self.key):
            raise ValueError("stream keys must be non-negative")

    def child(self, *key: int) -> "Stream":
        return Stream(self.seed, self.key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng: "Stream | int") -> Stream:
    if isinstance(rng, Stream):
        return rng
    return Stream(int(rng))
