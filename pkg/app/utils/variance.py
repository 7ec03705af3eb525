# app/utils/variance.py
"""
Variance estimators for subbagged ensembles.

matched  : within-group tree variance minus the (MB-1)/MB-scaled sample
           variance of all trees; unbiased for Var(U_match).
bootstrap: for k > n/2, tree variance from extra with-replacement trees,
           sample variance from an M=1 subset forest.
smoothed : average of the above over the target and N neighbours on the
           sphere whose radius is the distance to the nearest training row.
"""
import logging
import math

import numpy as np
from scipy.stats import norm

from app.core.config import DEFAULT_ALPHA, ForestConfig, SamplingMode
from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.errors import DegenerateEnsemble, GroupTooSmall, NegativeVariance
from app.core.random_stream import NEIGHBORS, REFIT, RandomStream
from app.schemas.variance import EstimatorMode, VarianceReport
from app.utils.forest import Forest, PredictionMatrix, fit_bootstrap_forest, fit_forest, point_estimate, predict_matrix
from app.utils.sampling import plan_for_config

logger = logging.getLogger(__name__)


def confidence_interval(point: float, variance: float, alpha: float) -> tuple[float, float]:
    """Normal interval point ± z_{alpha/2}·sqrt(variance)."""
    if variance < 0:
        raise NegativeVariance(f"variance {variance} is negative; clip before building an interval")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    half = float(norm.ppf(1.0 - alpha / 2.0)) * math.sqrt(variance)
    return point - half, point + half


def build_report(
    point: float,
    vh_hat: float,
    vs_hat: float,
    variance_raw: float,
    alpha: float,
    mode: EstimatorMode,
    n_neighbors: int = 0,
) -> VarianceReport:
    variance = max(variance_raw, 0.0)
    ci_low, ci_high = confidence_interval(point, variance, alpha)
    return VarianceReport(
        point=point,
        vh_hat=vh_hat,
        vs_hat=vs_hat,
        variance_raw=variance_raw,
        variance=variance,
        clipped=variance_raw < 0.0,
        ci_low=ci_low,
        ci_high=ci_high,
        alpha=alpha,
        mode=mode,
        n_neighbors=n_neighbors,
    )


def estimate_vh_matched(pm: PredictionMatrix) -> float:
    """Average over groups of the within-group sample variance (divisor M-1)."""
    if pm.m < 2:
        raise GroupTooSmall(f"within-group variance needs M >= 2, got M={pm.m}")
    return float(np.mean(np.var(pm.values, axis=0, ddof=1)))


def estimate_vs(pm: PredictionMatrix) -> float:
    """Sample variance of all M·B predictions with divisor MB-1."""
    total = pm.values.size
    if total < 2:
        raise DegenerateEnsemble(f"need at least two predictions, got {total}")
    centered = pm.values - point_estimate(pm)
    return float(np.sum(centered * centered) / (total - 1))


def matched_variance_estimate(pm: PredictionMatrix, alpha: float = DEFAULT_ALPHA) -> VarianceReport:
    vh = estimate_vh_matched(pm)
    vs = estimate_vs(pm)
    total = pm.values.size
    raw = vh - (total - 1) / total * vs
    return build_report(point_estimate(pm), vh, vs, raw, alpha, EstimatorMode.MATCHED)


def bootstrap_variance_estimate(main_preds, boot_preds, alpha: float = DEFAULT_ALPHA) -> VarianceReport:
    """k > n/2 estimator from B subset-tree predictions and B' bootstrap-tree predictions."""
    main = np.asarray(main_preds, dtype=float).reshape(-1)
    boot = np.asarray(boot_preds, dtype=float).reshape(-1)
    if main.size < 2 or boot.size < 2:
        raise DegenerateEnsemble(f"need B >= 2 and B' >= 2, got B={main.size}, B'={boot.size}")
    vh = float(np.var(boot, ddof=1))
    vs = float(np.var(main, ddof=1))
    b = main.size
    raw = vh - (b - 1) / b * vs
    return build_report(float(np.mean(main)), vh, vs, raw, alpha, EstimatorMode.BOOTSTRAP)


def generate_neighbors(x: TargetPoint | np.ndarray, data: Dataset, n_neighbors: int, rs: RandomStream) -> list[TargetPoint]:
    """N points uniform on the sphere around x with radius = distance to the closest training row."""
    x = as_target(x)
    if n_neighbors <= 0:
        return []
    x.check_dimension(data.d)
    radius = float(np.min(np.linalg.norm(data.features - x.coordinates, axis=1)))
    directions = rs.generator().standard_normal((n_neighbors, data.d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return [TargetPoint(x.coordinates + radius * u) for u in directions]


def forest_variance_estimate(
    forest: Forest, x: TargetPoint | np.ndarray, boot_forest: Forest | None = None, alpha: float | None = None
) -> VarianceReport:
    """Matched estimate for a matched forest, bootstrap estimate for an M=1 forest with boot_forest."""
    alpha = forest.config.alpha if alpha is None else alpha
    pm = predict_matrix(forest, x)
    if forest.plan.mode is SamplingMode.MATCHED:
        return matched_variance_estimate(pm, alpha)
    if boot_forest is None:
        raise GroupTooSmall("forests without matched groups need bootstrap trees to estimate tree variance")
    boot = predict_matrix(boot_forest, x)
    return bootstrap_variance_estimate(pm.values.reshape(-1), boot.values.reshape(-1), alpha)


def _refit(data: Dataset, cfg: ForestConfig, rs: RandomStream, with_bootstrap: bool) -> tuple[Forest, Forest | None]:
    plan = plan_for_config(data.n, cfg, rs)
    forest = fit_forest(data, plan, cfg, rs)
    return forest, (fit_bootstrap_forest(data, cfg, rs) if with_bootstrap else None)


def smoothed_variance_estimate(
    f: Forest,
    x: TargetPoint | np.ndarray,
    data: Dataset,
    n_neighbors: int,
    rs: RandomStream,
    boot_forest: Forest | None = None,
    refit: bool = False,
    alpha: float | None = None,
) -> VarianceReport:
    """
    Average of the raw estimates at x and its N neighbours. The point estimate
    stays the forest prediction at x. With refit=True each neighbour gets its
    own freshly sampled plan and forest instead of reusing f.
    """
    x = as_target(x)
    alpha = f.config.alpha if alpha is None else alpha
    neighbors = generate_neighbors(x, data, n_neighbors, rs.split([NEIGHBORS]))

    reports = [forest_variance_estimate(f, x, boot_forest, alpha)]
    for j, neighbor in enumerate(neighbors):
        if refit:
            nf, nb = _refit(data, f.config, rs.split([REFIT, j]), boot_forest is not None)
            reports.append(forest_variance_estimate(nf, neighbor, nb, alpha))
        else:
            reports.append(forest_variance_estimate(f, neighbor, boot_forest, alpha))

    if n_neighbors == 0:
        return reports[0]

    raw = float(np.mean([r.variance_raw for r in reports]))
    vh = float(np.mean([r.vh_hat for r in reports]))
    vs = float(np.mean([r.vs_hat for r in reports]))
    return build_report(reports[0].point, vh, vs, raw, alpha, EstimatorMode.SMOOTHED, n_neighbors=len(neighbors))
