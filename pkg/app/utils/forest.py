# app/utils/forest.py
"""The ensemble over a sampling plan and its M×B prediction matrix at a target point."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import orjson

from app.core.config import ForestConfig, SamplingMode
from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.errors import IndexOutOfRange
from app.core.random_stream import BOOTSTRAP, SAMPLING, TREE, RandomStream
from app.utils.kernels import Kernel, Predictor, load_predictor, make_kernel
from app.utils.sampling import SamplingPlan, sample_bootstrap_plan

logger = logging.getLogger(__name__)

FOREST_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """values[i, b] = h(S_i^(b))(x): rows are positions within a group, columns are groups."""

    values: np.ndarray
    target: TargetPoint | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"prediction matrix must be a non-empty M×B array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("prediction matrix contains non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def b(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[tuple[Predictor, ...], ...]  # trees[b][i]
    plan: SamplingPlan
    config: ForestConfig
    n_features: int

    def to_json(self) -> bytes:
        return orjson.dumps(
            {
                "format_version": FOREST_FORMAT_VERSION,
                "config": self.config.model_dump(mode="json"),
                "n_features": self.n_features,
                "plan": self.plan.to_dict(),
                "trees": [[t.to_dict() for t in group] for group in self.trees],
            }
        )

    @classmethod
    def from_json(cls, raw: bytes | str) -> "Forest":
        payload = orjson.loads(raw)
        version = payload.get("format_version")
        if version != FOREST_FORMAT_VERSION:
            raise ValueError(f"Unsupported forest format version {version}")
        return cls(
            trees=tuple(tuple(load_predictor(t) for t in group) for group in payload["trees"]),
            plan=SamplingPlan.from_dict(payload["plan"]),
            config=ForestConfig.model_validate(payload["config"]),
            n_features=int(payload["n_features"]),
        )


def _check_plan(data: Dataset, plan: SamplingPlan) -> None:
    if plan.groups.min() < 0 or plan.max_index() >= data.n:
        raise IndexOutOfRange(f"plan references rows outside 0..{data.n - 1}")


def _fit_groups(
    data: Dataset, plan: SamplingPlan, kernel: Kernel, rs: RandomStream, start: int, stop: int
) -> list[tuple[Predictor, ...]]:
    return [
        tuple(kernel.fit(data, plan.subset(b, i), rs.split([TREE, b, i])) for i in range(plan.m))
        for b in range(start, stop)
    ]


def fit_forest(
    data: Dataset,
    plan: SamplingPlan,
    cfg: ForestConfig,
    rs: RandomStream,
    kernel: Kernel | None = None,
    workers: int = 1,
) -> Forest:
    """One fit per plan entry; entry (b, i) uses stream split(rs, [TREE, b, i])."""
    _check_plan(data, plan)
    kernel = kernel or make_kernel(cfg)

    if workers <= 1 or plan.b < 2 * workers:
        trees = _fit_groups(data, plan, kernel, rs, 0, plan.b)
    else:
        bounds = np.linspace(0, plan.b, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(
                _fit_groups,
                *zip(*[(data, plan, kernel, rs, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]),
            )
            trees = [group for chunk in chunks for group in chunk]

    logger.debug("fitted %d %s predictors (B=%d, M=%d)", plan.b * plan.m, kernel.name, plan.b, plan.m)
    return Forest(trees=tuple(trees), plan=plan, config=cfg, n_features=data.d)


def predict_matrix(f: Forest, x: TargetPoint | np.ndarray) -> PredictionMatrix:
    x = as_target(x)
    x.check_dimension(f.n_features)
    values = np.empty((f.plan.m, f.plan.b))
    for b, group in enumerate(f.trees):
        for i, tree in enumerate(group):
            values[i, b] = tree.predict(x)
    return PredictionMatrix(values, x)


def kernel_prediction_matrix(
    data: Dataset, plan: SamplingPlan, x: TargetPoint | np.ndarray, rs: RandomStream, kernel: Kernel
) -> PredictionMatrix:
    """Prediction matrix straight from a kernel, without keeping the fitted forest."""
    _check_plan(data, plan)
    x = as_target(x)
    return PredictionMatrix(kernel.predict_plan(data, plan, x, rs), x)


def point_estimate(pm: PredictionMatrix) -> float:
    """U_match: grand mean over all M×B entries (row-major pairwise summation)."""
    return float(np.sum(np.ascontiguousarray(pm.values)) / pm.values.size)


def fit_bootstrap_forest(
    data: Dataset, cfg: ForestConfig, rs: RandomStream, kernel: Kernel | None = None, workers: int = 1
) -> Forest:
    """
    The extra B trees fit on with-replacement resamples of size k, used only
    to estimate the single-tree variance when k > n/2. They never enter the
    forest average.
    """
    stream = rs.split([BOOTSTRAP])
    plan = sample_bootstrap_plan(data.n, cfg.k, cfg.b, stream.split([SAMPLING]))
    boot_cfg = cfg.model_copy(update={"mode": SamplingMode.BOOTSTRAP, "m": 1})
    return fit_forest(data, plan, boot_cfg, stream, kernel=kernel, workers=workers)
