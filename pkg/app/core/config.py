# app/core/config.py
import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import (
    DegenerateEnsemble,
    GroupTooSmall,
    InvalidConfig,
    KOutOfRange,
    MatchVarError,
    MTooLarge,
    MtryOutOfRange,
    NodesizeOutOfRange,
)

DEFAULT_ALPHA = 0.10


class SamplingMode(str, Enum):
    MATCHED = "matched"
    SUBSET = "subset"
    BOOTSTRAP = "bootstrap"


class ForestConfig(BaseModel):
    """Ensemble parameters. Cross-field invariants are checked by validate_config."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(..., description="Subsample size per tree")
    m: int = Field(2, ge=1, description="Subsamples per matched group (M)")
    b: int = Field(..., ge=1, description="Number of groups (B)")
    mtry: int | None = Field(None, description="Candidate features per split; default ceil(d/2)")
    nodesize: int | None = Field(None, description="Minimum terminal node size; default 2*floor(ln n)")
    seed: int = Field(0, ge=0, lt=2**64)
    smoothing_neighbors: int = Field(0, ge=0)
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    mode: SamplingMode = SamplingMode.MATCHED
    kernel: str = "tree"
    smooth_refit: bool = False

    @property
    def n_trees(self) -> int:
        return self.m * self.b


def default_mtry(d: int) -> int:
    return max(1, math.ceil(d / 2))


def default_nodesize(n: int) -> int:
    return max(1, 2 * math.floor(math.log(n))) if n > 1 else 1


def config_violations(cfg: ForestConfig, n: int, d: int | None = None) -> list[MatchVarError]:
    violations: list[MatchVarError] = []

    if cfg.k < 1 or cfg.k >= n:
        violations.append(KOutOfRange(f"k={cfg.k} must satisfy 1 <= k < n={n}"))

    if cfg.m * cfg.b < 2:
        violations.append(DegenerateEnsemble(f"M*B={cfg.m * cfg.b} must be at least 2"))

    if cfg.mode is SamplingMode.MATCHED:
        if cfg.m < 2:
            violations.append(GroupTooSmall(f"matched groups need M >= 2, got M={cfg.m}"))
        if cfg.k >= 1 and cfg.m > n // cfg.k:
            violations.append(MTooLarge(f"M={cfg.m} exceeds floor(n/k)={n // cfg.k}"))
    elif cfg.m != 1:
        violations.append(MTooLarge(f"{cfg.mode.value} plans use M=1, got M={cfg.m}"))

    if cfg.mtry is not None and (cfg.mtry < 1 or (d is not None and cfg.mtry > d)):
        violations.append(MtryOutOfRange(f"mtry={cfg.mtry} must satisfy 1 <= mtry <= d={d}"))

    if cfg.nodesize is not None and cfg.nodesize < 1:
        violations.append(NodesizeOutOfRange(f"nodesize={cfg.nodesize} must be at least 1"))

    return violations


def validate_config(cfg: ForestConfig, n: int, d: int | None = None) -> ForestConfig:
    """Return cfg unchanged when it is valid for a dataset of n rows (and d features)."""
    violations = config_violations(cfg, n, d)
    if violations:
        raise InvalidConfig(violations)
    return cfg


def with_defaults(cfg: ForestConfig, n: int, d: int) -> ForestConfig:
    """Fill mtry/nodesize from the data shape when they were left unset."""
    update = {}
    if cfg.mtry is None:
        update["mtry"] = default_mtry(d)
    if cfg.nodesize is None:
        update["nodesize"] = default_nodesize(n)
    return cfg.model_copy(update=update) if update else cfg
