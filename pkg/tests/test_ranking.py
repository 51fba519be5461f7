import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autkc.ranking import (
    kth_largest,
    kth_largest_excluding,
    top_m_indices,
    worst_case_rank,
    worst_case_rank_batch,
)

# score vectors with a decent chance of exact ties
score_vectors = st.lists(
    st.sampled_from([-2.0, -1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0]) | st.floats(-10, 10),
    min_size=2,
    max_size=8,
)


def test_worst_case_rank_examples():
    assert worst_case_rank([3, 1, 2], 0) == 1
    assert worst_case_rank([2, 2, 2], 1) == 3
    # an irrelevant label ranked above the ground truth costs one rank
    assert worst_case_rank([4, 3, 2, 5, 1], 0) == 2


def test_kth_largest_examples():
    assert kth_largest([1, 3, 3, 0], 2) == 3
    assert kth_largest([1, 3, 3, 0], 4) == 0
    assert kth_largest([5, 4, 3, 2, 1], 3) == 3


def test_kth_largest_excluding_examples():
    assert kth_largest_excluding([9, 1, 2], 0, 1) == 2
    assert kth_largest_excluding([9, 1, 2], 1, 2) == 2
    assert kth_largest_excluding([2, 2, 1], 0, 1) == 2


def test_top_m_indices_examples():
    assert top_m_indices([1, 5, 5, 0], 2).tolist() == [1, 2]
    assert top_m_indices([3, 2, 1], 3).tolist() == [0, 1, 2]
    assert top_m_indices([0.2, 0.9, 0.4, 0.9], 3).tolist() == [1, 3, 2]


@pytest.mark.parametrize(
    "call, args",
    [
        (worst_case_rank, ([1, 2], 2)),
        (kth_largest, ([1, 2], 0)),
        (kth_largest, ([1, 2], 3)),
        (kth_largest_excluding, ([1, 2], 0, 2)),
        (top_m_indices, ([1, 2], 3)),
    ],
)
def test_out_of_range_errors(call, args):
    with pytest.raises((ValueError, IndexError)):
        call(*args)


def test_rejects_non_finite_and_short():
    with pytest.raises(ValueError):
        worst_case_rank([np.nan, 1.0], 0)
    with pytest.raises(ValueError):
        kth_largest([1.0], 1)


@given(score_vectors, st.data())
@settings(max_examples=300, deadline=None)
def test_rank_counting_forms_agree(values, data):
    s = np.asarray(values)
    y = data.draw(st.integers(0, len(s) - 1))
    rank = worst_case_rank(s, y)
    alt = 1 + int(np.sum(s > s[y])) + int(np.sum(np.delete(s, y) == s[y]))
    assert rank == alt


@given(score_vectors, st.data())
@settings(max_examples=300, deadline=None)
def test_kth_largest_at_rank_recovers_score(values, data):
    s = np.asarray(values)
    y = data.draw(st.integers(0, len(s) - 1))
    assert kth_largest(s, worst_case_rank(s, y)) == s[y]


@given(score_vectors, st.data())
@settings(max_examples=300, deadline=None)
def test_excluding_matches_deleted_vector(values, data):
    s = np.asarray(values)
    y = data.draw(st.integers(0, len(s) - 1))
    k = data.draw(st.integers(1, len(s) - 1))
    oracle = np.sort(np.delete(s, y))[::-1][k - 1]
    assert kth_largest_excluding(s, y, k) == oracle


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=8, unique=True), st.data())
@settings(max_examples=200, deadline=None)
def test_tie_free_rank_matches_argsort(values, data):
    s = np.asarray(values)
    y = data.draw(st.integers(0, len(s) - 1))
    sorted_rank = int(np.where(np.argsort(-s) == y)[0][0]) + 1
    assert worst_case_rank(s, y) == sorted_rank


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    scores = np.round(rng.standard_normal((50, 6)), 1)  # rounding injects ties
    labels = rng.integers(0, 6, size=50)
    batch = worst_case_rank_batch(scores, labels)
    assert batch.tolist() == [worst_case_rank(s, y) for s, y in zip(scores, labels)]
