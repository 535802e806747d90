"""Budget allocation dynamic program."""
import numpy as np
import pytest

from models.curves import CurveSet, SampleGrid
from models.errors import DomainError
from models.summary import SegmentModelKind
from oracles import best_allocation
from services.allocation import allocate, build_R, cluster_members
from services.segmentation import summarize_set


def _random_R(rng, n_clusters, n_columns):
    # optimal error tables are non-increasing in p
    steps = rng.exponential(1.0, size=(n_clusters, n_columns))
    return np.flip(np.cumsum(steps, axis=1), axis=1)


def test_allocation_matches_composition_enumeration(rng):
    for _ in range(100):
        k = int(rng.integers(1, 5))
        p = int(rng.integers(k, 13))
        columns = int(rng.integers(max(1, -(-p // k)), p - k + 2))
        R = _random_R(rng, k, columns) if rng.random() < 0.7 else rng.uniform(0, 10, size=(k, columns))
        cap = None if rng.random() < 0.5 else int(rng.integers(-(-p // k), columns + 1))
        expected, counts = best_allocation(R, p, cap)
        result = allocate(R, p, cap=cap)
        assert result.cost == pytest.approx(expected, rel=1e-9)
        assert sum(result.counts) == p
        assert sum(R[i, c - 1] for i, c in enumerate(result.counts)) == pytest.approx(expected, rel=1e-9)
        if cap is not None:
            assert max(result.counts) <= cap


def test_budget_goes_to_the_complex_cluster():
    R = np.array([[5.0, 0.0, 0.0, 0.0], [9.0, 6.0, 3.0, 0.0]])
    assert allocate(R, 5).counts == (2, 3)
    assert allocate(R, 5).cost == 3.0


def test_ties_give_the_later_clusters_fewer_segments():
    R = np.zeros((3, 4))
    assert allocate(R, 6).counts == (4, 1, 1)


def test_infeasible_budgets_are_rejected():
    R = np.ones((3, 2))
    with pytest.raises(DomainError):
        allocate(R, 2)
    with pytest.raises(DomainError):
        allocate(R, 7)
    with pytest.raises(DomainError):
        allocate(R, 6, cap=1)


def test_single_cluster_takes_the_whole_budget():
    R = np.array([[4.0, 2.0, 1.0]])
    result = allocate(R, 3)
    assert result.counts == (3,)
    assert result.cost == 1.0


def test_R_rows_are_the_clusters_optimal_errors(rng):
    curves = CurveSet(SampleGrid.regular(12), rng.normal(size=(7, 12)))
    assignment = np.array([0, 1, 0, 2, 1, 2, 0])
    R = build_R(curves, assignment, SegmentModelKind(), 4)
    assert R.shape == (3, 4)
    for k, members in enumerate(cluster_members(assignment, 3)):
        expected = summarize_set(curves, SegmentModelKind(), 4, members=members).tables.optimal_costs()
        np.testing.assert_array_equal(R[k], expected)


def test_empty_clusters_and_oversized_budgets_are_rejected(rng):
    curves = CurveSet(SampleGrid.regular(5), rng.normal(size=(3, 5)))
    with pytest.raises(DomainError):
        build_R(curves, np.array([0, 0, 2]), SegmentModelKind(), 2, n_clusters=3)
    with pytest.raises(DomainError):
        build_R(curves, np.array([0, 1, 1]), SegmentModelKind(), 6)
