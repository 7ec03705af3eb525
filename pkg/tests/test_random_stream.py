import pytest

from app.core.random_stream import (
    BOOTSTRAP,
    DATA,
    NEIGHBORS,
    REFIT,
    REPLICATION,
    SAMPLING,
    SMOOTHING,
    TARGETS,
    TREE,
    TRUTH,
    RandomStream,
    split_stream,
)


def first_draws(rs: RandomStream, size: int = 4):
    return rs.generator().integers(0, 2**63, size=size).tolist()


def test_same_path_same_sequence():
    s = RandomStream(42)
    assert first_draws(split_stream(s, [0])) == first_draws(split_stream(s, [0]))


def test_sibling_paths_differ():
    s = RandomStream(42)
    assert first_draws(s.split([0])) != first_draws(s.split([1]))


def test_path_composition():
    s = RandomStream(5)
    assert first_draws(s.split([2]).split([3])) == first_draws(s.split([2, 3]))


def test_seeds_differ():
    assert first_draws(RandomStream(1)) != first_draws(RandomStream(2))


def test_full_range_seed_accepted():
    assert len(first_draws(RandomStream(2**64 - 1))) == 4


def test_negative_seed_and_path_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(1).split([-3])


def test_derived_seed_is_stable_and_fits_int64():
    s = RandomStream(9).split([4, 7])
    assert s.derive_seed() == RandomStream(9).split([4, 7]).derive_seed()
    assert 0 <= s.derive_seed() < 2**63
    assert s.derive_seed() != RandomStream(9).split([4, 8]).derive_seed()


def test_purpose_paths_are_distinct():
    purposes = [SAMPLING, TREE, NEIGHBORS, BOOTSTRAP, REPLICATION, TRUTH, DATA, TARGETS, REFIT, SMOOTHING]
    assert len(set(purposes)) == len(purposes)
