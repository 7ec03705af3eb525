"""
Monte Carlo checks of the estimators against exact truth.

The mean-kernel checks are fast and always run. Tree-based studies are
marked slow and only run with --runslow.
"""
import math
import os

import numpy as np
import pytest

from app.core.dataset import Dataset
from app.core.random_stream import RandomStream
from app.schemas.experiment import ExperimentConfig
from app.utils.forest import kernel_prediction_matrix, point_estimate
from app.utils.harness import run_experiment
from app.utils.kernels import MeanKernel
from app.utils.oracle import expected_vs_matched, matched_variance_closed_form, mean_kernel_profile
from app.utils.sampling import sample_matched_groups, sample_subset_plan
from app.utils.sim_models import SimModelName
from app.utils.variance import matched_variance_estimate

WORKERS = os.cpu_count() or 1


def _mean_kernel_reps(n: int, k: int, m: int, b: int, reps: int, seed: int):
    """(point, vs_hat, variance_raw) per replication with N(0, 1) responses."""
    kernel = MeanKernel()
    out = np.empty((reps, 3))
    for r in range(reps):
        rs = RandomStream(seed).split([r])
        y = rs.split([0]).generator().standard_normal(n)
        data = Dataset(features=np.zeros((n, 1)), response=y)
        plan = sample_matched_groups(n, k, m, b, rs.split([1]))
        report = matched_variance_estimate(kernel_prediction_matrix(data, plan, [0.0], rs, kernel), alpha=0.1)
        out[r] = report.point, report.vs_hat, report.variance_raw
    return out


def _within(values: np.ndarray, target: float, n_se: float = 4.0) -> bool:
    se = np.std(values, ddof=1) / math.sqrt(values.size)
    return abs(float(np.mean(values)) - target) <= n_se * se


@pytest.fixture(scope="module")
def mean_kernel_study():
    n, k, m, b = 100, 50, 2, 100
    return (n, k, m, b), _mean_kernel_reps(n, k, m, b, reps=2000, seed=2024)


def test_matched_estimator_is_unbiased_for_mean_kernel(mean_kernel_study):
    (n, k, m, b), reps = mean_kernel_study
    truth = float(matched_variance_closed_form(n, k, m, b, mean_kernel_profile(n, k)))
    assert truth == pytest.approx(0.01)
    assert _within(reps[:, 2], truth)


def test_vs_hat_expectation_matches_closed_form(mean_kernel_study):
    (n, k, m, b), reps = mean_kernel_study
    expected = float(expected_vs_matched(n, k, m, b, mean_kernel_profile(n, k)))
    assert expected == pytest.approx((1 - 1 / 199) * 0.01 + 0.02 / 199)
    assert _within(reps[:, 1], expected)


def test_oracle_interval_coverage(mean_kernel_study):
    (n, k, m, b), reps = mean_kernel_study
    truth = float(matched_variance_closed_form(n, k, m, b, mean_kernel_profile(n, k)))
    z = 1.6448536269514722
    covered = np.abs(reps[:, 0]) <= z * math.sqrt(truth)
    assert abs(covered.mean() - 0.90) <= 0.02


def test_point_estimate_is_unbiased_for_mean(mean_kernel_study):
    _, reps = mean_kernel_study
    assert _within(reps[:, 0], 0.0, n_se=3.0)


POINT_N, POINT_K = 100, 25


def _point_reps(draw_plan, reps: int, seed: int) -> np.ndarray:
    """Forest point estimates of the mean kernel over fresh N(0, 1) data and plans."""
    kernel = MeanKernel()
    out = np.empty(reps)
    for r in range(reps):
        rs = RandomStream(seed).split([r])
        y = rs.split([0]).generator().standard_normal(POINT_N)
        data = Dataset(features=np.zeros((POINT_N, 1)), response=y)
        plan = draw_plan(rs.split([1]))
        out[r] = point_estimate(kernel_prediction_matrix(data, plan, [0.0], rs, kernel))
    return out


def _variance_within(points: np.ndarray, target: float, n_se: float = 4.0) -> bool:
    squares = (points - points.mean()) ** 2
    se = np.std(squares, ddof=1) / math.sqrt(points.size)
    return abs(float(np.var(points, ddof=1)) - target) <= n_se * se


@pytest.fixture(scope="module")
def matched_points():
    return _point_reps(lambda rs: sample_matched_groups(POINT_N, POINT_K, 2, 2, rs), reps=4000, seed=31)


@pytest.fixture(scope="module")
def subset_points():
    return _point_reps(lambda rs: sample_subset_plan(POINT_N, POINT_K, 4, rs), reps=4000, seed=37)


def test_matched_point_variance_follows_closed_form(matched_points):
    truth = float(matched_variance_closed_form(POINT_N, POINT_K, 2, 2, mean_kernel_profile(POINT_N, POINT_K)))
    assert truth == pytest.approx(0.015)
    assert _variance_within(matched_points, truth)


def test_subset_point_variance_follows_closed_form(subset_points):
    truth = float(matched_variance_closed_form(POINT_N, POINT_K, 1, 4, mean_kernel_profile(POINT_N, POINT_K)))
    assert truth == pytest.approx(0.0175)
    assert _variance_within(subset_points, truth)


def test_matched_groups_beat_independent_subsets_at_equal_tree_count(matched_points, subset_points):
    assert np.var(matched_points, ddof=1) < np.var(subset_points, ddof=1)


@pytest.mark.parametrize("n,k", [(20, 3), (40, 10), (100, 25)])
def test_matched_closed_form_never_exceeds_subsets(n, k):
    profile = mean_kernel_profile(n, k)
    for m in range(2, n // k + 1):
        for b in (1, 2, 5, 20):
            assert matched_variance_closed_form(n, k, m, b, profile) <= matched_variance_closed_form(n, k, 1, m * b, profile)


@pytest.mark.slow
def test_ratio_spread_shrinks_with_n():
    spreads = []
    for n in (128, 512, 2048):
        k = int(n**0.4)
        m, b = n // k, n // 4
        truth = float(matched_variance_closed_form(n, k, m, b, mean_kernel_profile(n, k)))
        reps = _mean_kernel_reps(n, k, m, b, reps=500, seed=n)
        spreads.append(float(np.std(reps[:, 2] / truth, ddof=1)))
    assert spreads[0] > spreads[1] > spreads[2]


def test_harness_with_mean_kernel_matches_closed_form():
    cfg = ExperimentConfig(
        model=SimModelName.CONSTANT,
        kernel="mean",
        n=40,
        k=10,
        m=2,
        b=20,
        n_mc=400,
        n_truth=400,
        targets="center",
        seed=5,
    )
    result = run_experiment(cfg)
    truth = float(matched_variance_closed_form(40, 10, 2, 20, mean_kernel_profile(40, 10)))

    points = result.records["point"].to_numpy(dtype=float)
    assert _within(points, 0.0)
    assert _within(result.records["var_raw"].to_numpy(dtype=float), truth)
    # truth from 400 fits carries about 7% relative error
    assert result.summary[0].truth_var == pytest.approx(truth, rel=0.3)


@pytest.mark.slow
def test_bootstrap_estimator_overestimates_for_large_k():
    cfg = ExperimentConfig(
        model=SimModelName.MARS,
        n=100,
        k=80,
        b=100,
        n_mc=60,
        n_truth=200,
        targets="random:3",
        seed=8,
        workers=WORKERS,
    )
    result = run_experiment(cfg)
    assert {row.estimator for row in result.summary} == {"bootstrap"}
    assert np.mean([row.relative_bias for row in result.summary]) > 0.0


@pytest.fixture(scope="module")
def mars_desk_study():
    cfg = ExperimentConfig(model=SimModelName.MARS, smoothing=10, seed=1, workers=WORKERS)
    return run_experiment(cfg)


@pytest.mark.slow
def test_mars_desk_scale_bias_and_coverage(mars_desk_study):
    matched = [row for row in mars_desk_study.summary if row.estimator == "matched"]
    assert len(matched) == 10
    assert -0.05 <= np.mean([row.relative_bias for row in matched]) <= 0.05
    assert 0.75 <= np.mean([row.coverage for row in matched]) <= 0.90
    assert abs(np.mean([row.oracle_coverage for row in matched]) - 0.90) <= 3 * math.sqrt(0.09 / 300)


@pytest.mark.slow
def test_smoothing_reduces_estimator_spread(mars_desk_study):
    by_estimator = {"matched": [], "smoothed": []}
    for row in mars_desk_study.summary:
        by_estimator[row.estimator].append(row.sd_estimate)
    assert np.mean(by_estimator["smoothed"]) < np.mean(by_estimator["matched"])
