import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.config import ForestConfig, SamplingMode
from app.core.errors import DegenerateEnsemble, GroupTooSmall, KOutOfRange, MTooLarge
from app.core.random_stream import RandomStream
from app.utils.sampling import (
    SamplingPlan,
    plan_for_config,
    sample_bootstrap_plan,
    sample_matched_groups,
    sample_subset_plan,
)


def test_full_partition_when_mk_equals_n():
    plan = sample_matched_groups(4, 2, 2, 1, RandomStream(0))
    assert plan.groups.shape == (1, 2, 2)
    assert sorted(plan.groups[0].ravel().tolist()) == [0, 1, 2, 3]


def test_one_index_left_out_per_group():
    plan = sample_matched_groups(7, 3, 2, 5, RandomStream(1))
    assert plan.b == 5
    for group in plan.groups:
        assert len(set(group.ravel().tolist())) == 6


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 40),
    k=st.integers(1, 20),
    m=st.integers(2, 5),
    b=st.integers(1, 6),
    seed=st.integers(0, 2**32),
)
def test_sets_in_a_group_are_disjoint(n, k, m, b, seed):
    if m * k > n:
        with pytest.raises((KOutOfRange, MTooLarge)):
            sample_matched_groups(n, k, m, b, RandomStream(seed))
        return
    plan = sample_matched_groups(n, k, m, b, RandomStream(seed))
    assert plan.groups.shape == (b, m, k)
    assert plan.groups.min() >= 0 and plan.max_index() < n
    for group in plan.groups:
        assert len(set(group.ravel().tolist())) == m * k
        assert all(np.all(np.diff(s) > 0) for s in group)


def test_first_position_frequency_is_exchangeable():
    n, k, b = 10, 5, 10_000
    plan = sample_matched_groups(n, k, 2, b, RandomStream(3))
    freq = np.array([(plan.groups[:, 0, :] == i).any(axis=1).mean() for i in range(n)])
    se = np.sqrt(0.25 / b)
    assert np.all(np.abs(freq - 0.5) < 4 * se)


def test_matched_plan_is_deterministic():
    a = sample_matched_groups(20, 4, 3, 8, RandomStream(12))
    b = sample_matched_groups(20, 4, 3, 8, RandomStream(12))
    assert np.array_equal(a.groups, b.groups)


def test_matched_plan_errors():
    with pytest.raises(GroupTooSmall):
        sample_matched_groups(10, 2, 1, 3, RandomStream(0))
    with pytest.raises(MTooLarge):
        sample_matched_groups(10, 4, 3, 3, RandomStream(0))
    with pytest.raises(KOutOfRange):
        sample_matched_groups(10, 0, 2, 3, RandomStream(0))


def test_plan_is_read_only():
    plan = sample_matched_groups(10, 2, 2, 3, RandomStream(0))
    with pytest.raises(ValueError):
        plan.groups[0, 0, 0] = 5


def test_subset_of_everything():
    plan = sample_subset_plan(3, 3, 4, RandomStream(0))
    assert all(s.tolist() == [0, 1, 2] for s in plan.groups[:, 0, :])


def test_subset_frequencies_are_uniform():
    b = 60_000
    plan = sample_subset_plan(4, 2, b, RandomStream(8))
    pairs, counts = np.unique(plan.groups[:, 0, :], axis=0, return_counts=True)
    assert len(pairs) == 6
    se = np.sqrt((1 / 6) * (5 / 6) / b)
    assert np.all(np.abs(counts / b - 1 / 6) < 4 * se)


def test_subset_plan_needs_two_subsets():
    sample_subset_plan(5, 2, 2, RandomStream(0))
    with pytest.raises(DegenerateEnsemble):
        sample_subset_plan(5, 2, 1, RandomStream(0))


def test_bootstrap_single_atom():
    plan = sample_bootstrap_plan(1, 3, 2, RandomStream(0))
    assert plan.groups.tolist() == [[[0, 0, 0]], [[0, 0, 0]]]
    assert plan.mode is SamplingMode.BOOTSTRAP


def test_bootstrap_multiset_frequency():
    b = 40_000
    plan = sample_bootstrap_plan(2, 2, b, RandomStream(4))
    freq = np.mean(np.all(plan.groups[:, 0, :] == 0, axis=1))
    assert abs(freq - 0.25) < 4 * np.sqrt(0.25 * 0.75 / b)


def test_bootstrap_distinct_count_matches_occupancy():
    b = 20_000
    plan = sample_bootstrap_plan(5, 5, b, RandomStream(6))
    distinct = np.array([len(np.unique(s)) for s in plan.groups[:, 0, :]])
    expected = 5 * (1 - (4 / 5) ** 5)
    assert abs(distinct.mean() - expected) < 4 * distinct.std() / np.sqrt(b)


def test_plan_for_config_dispatches_on_mode():
    rs = RandomStream(2)
    matched = plan_for_config(20, ForestConfig(k=5, m=2, b=3), rs)
    subset = plan_for_config(20, ForestConfig(k=15, m=1, b=3, mode=SamplingMode.SUBSET), rs)
    assert matched.mode is SamplingMode.MATCHED and matched.groups.shape == (3, 2, 5)
    assert subset.mode is SamplingMode.SUBSET and subset.groups.shape == (3, 1, 15)


def test_plan_json_keeps_indices():
    plan = sample_matched_groups(12, 3, 2, 4, RandomStream(5))
    restored = SamplingPlan.from_json(plan.to_json())
    assert restored.mode is plan.mode
    assert np.array_equal(restored.groups, plan.groups)
