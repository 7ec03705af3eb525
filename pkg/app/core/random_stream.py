# app/core/random_stream.py
"""
Splittable deterministic randomness.

A stream is identified by (seed, path). Children are addressed by purpose
paths so that adding trees or replications never perturbs earlier draws:

    sampling              [SAMPLING]
    tree (b, i)           [TREE, b, i]
    neighbour points      [NEIGHBORS]
    bootstrap trees       [BOOTSTRAP], plan at [BOOTSTRAP, SAMPLING]
    replication r         [REPLICATION, r]
    truth fit t           [TRUTH, t]
    simulated data        [DATA]
    random targets        [TARGETS]
    neighbour refit j     [REFIT, j]
    smoothing target j    [SMOOTHING, j]

Draws come from numpy's counter-based Philox bit generator keyed by a
SeedSequence whose spawn_key is the path.
"""
from dataclasses import dataclass
from typing import Iterable

import numpy as np

SAMPLING = 0
TREE = 1
NEIGHBORS = 2
BOOTSTRAP = 3
REPLICATION = 4
TRUTH = 5
DATA = 6
TARGETS = 7
REFIT = 8
SMOOTHING = 9

_UINT64_MASK = (1 << 64) - 1
_INT63_MASK = (1 << 63) - 1


@dataclass(frozen=True)
class RandomStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if any(p < 0 for p in self.path):
            raise ValueError(f"stream path entries must be non-negative, got {self.path}")

    def split(self, path: Iterable[int]) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(int(p) for p in path))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed & _UINT64_MASK, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    def derive_seed(self) -> int:
        """A non-negative int64 seed that stands for this stream in replication ledgers."""
        seq = np.random.SeedSequence(self.seed & _UINT64_MASK, spawn_key=self.path)
        lo, hi = seq.generate_state(2, dtype=np.uint32)
        return (int(lo) | (int(hi) << 32)) & _INT63_MASK


def split_stream(rs: RandomStream, path: Iterable[int]) -> RandomStream:
    return rs.split(path)
