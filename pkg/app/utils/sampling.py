# app/utils/sampling.py
"""Subsample plans: matched groups, independent subsets and bootstrap multisets."""
import logging
from dataclasses import dataclass

import numpy as np
import orjson

from app.core.config import ForestConfig, SamplingMode
from app.core.errors import DegenerateEnsemble, GroupTooSmall, KOutOfRange, MTooLarge
from app.core.random_stream import SAMPLING, RandomStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """B groups of M index sets of size k, stored as a read-only (B, M, k) array of 0-based indices."""

    mode: SamplingMode
    groups: np.ndarray

    def __post_init__(self):
        groups = np.array(self.groups, dtype=np.int64, copy=True)
        if groups.ndim != 3:
            raise ValueError(f"plan groups must have shape (B, M, k), got {groups.shape}")
        groups.flags.writeable = False
        object.__setattr__(self, "groups", groups)

    @property
    def b(self) -> int:
        return self.groups.shape[0]

    @property
    def m(self) -> int:
        return self.groups.shape[1]

    @property
    def k(self) -> int:
        return self.groups.shape[2]

    def subset(self, b: int, i: int) -> np.ndarray:
        return self.groups[b, i]

    def max_index(self) -> int:
        return int(self.groups.max())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "k": self.k,
            "m": self.m,
            "b": self.b,
            "groups": self.groups.tolist(),
        }

    def to_json(self) -> bytes:
        return orjson.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "SamplingPlan":
        return cls(mode=SamplingMode(payload["mode"]), groups=np.asarray(payload["groups"], dtype=np.int64))

    @classmethod
    def from_json(cls, raw: bytes | str) -> "SamplingPlan":
        return cls.from_dict(orjson.loads(raw))


def _shuffled_rows(n: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    # each row is an independent uniform permutation of 0..n-1
    return rng.permuted(np.tile(np.arange(n, dtype=np.int64), (rows, 1)), axis=1)


def sample_matched_groups(n: int, k: int, m: int, b: int, rs: RandomStream) -> SamplingPlan:
    """
    Draw B matched groups. Each group takes M*k indices without replacement
    and cuts them into M consecutive blocks of k, so sets within a group are
    disjoint. Groups are independent of each other; indices beyond M*k are
    left unused in that group.
    """
    if k < 1 or k > n:
        raise KOutOfRange(f"k={k} must satisfy 1 <= k <= n={n}")
    if m < 2:
        raise GroupTooSmall(f"matched groups need M >= 2, got M={m}")
    if m * k > n:
        raise MTooLarge(f"M={m} exceeds floor(n/k)={n // k}")
    if b < 1:
        raise DegenerateEnsemble(f"need at least one group, got B={b}")

    rng = rs.generator()
    blocks = _shuffled_rows(n, b, rng)[:, : m * k].reshape(b, m, k)
    logger.debug("matched plan n=%d k=%d M=%d B=%d", n, k, m, b)
    return SamplingPlan(SamplingMode.MATCHED, np.sort(blocks, axis=2))


def sample_subset_plan(n: int, k: int, b: int, rs: RandomStream) -> SamplingPlan:
    """B independent uniform size-k subsets (without replacement inside a subset), M = 1."""
    if k < 1 or k > n:
        raise KOutOfRange(f"k={k} must satisfy 1 <= k <= n={n}")
    if b < 2:
        raise DegenerateEnsemble(f"subset plans need B >= 2, got B={b}")

    rng = rs.generator()
    subsets = _shuffled_rows(n, b, rng)[:, :k].reshape(b, 1, k)
    return SamplingPlan(SamplingMode.SUBSET, np.sort(subsets, axis=2))


def sample_bootstrap_plan(n: int, k: int, b: int, rs: RandomStream) -> SamplingPlan:
    """B size-k multisets drawn with replacement from the n indices, M = 1."""
    if b < 2:
        raise DegenerateEnsemble(f"bootstrap plans need B >= 2, got B={b}")
    if k < 1 or n < 1:
        raise KOutOfRange(f"bootstrap draws need k >= 1 and n >= 1, got k={k}, n={n}")

    rng = rs.generator()
    draws = rng.integers(0, n, size=(b, 1, k), dtype=np.int64)
    return SamplingPlan(SamplingMode.BOOTSTRAP, np.sort(draws, axis=2))


def plan_for_config(n: int, cfg: ForestConfig, rs: RandomStream) -> SamplingPlan:
    """The plan a config asks for, drawn from the sampling child of rs."""
    stream = rs.split([SAMPLING])
    if cfg.mode is SamplingMode.MATCHED:
        return sample_matched_groups(n, cfg.k, cfg.m, cfg.b, stream)
    if cfg.mode is SamplingMode.SUBSET:
        return sample_subset_plan(n, cfg.k, cfg.b, stream)
    return sample_bootstrap_plan(n, cfg.k, cfg.b, stream)
