"""Segmentation dynamic program against exhaustive enumeration."""
import time

import numpy as np
import pytest

from models.curves import CurveSet, SampleGrid
from models.errors import DomainError
from models.summary import (
    CurveAggregation,
    KnotSet,
    SegmentAggregator,
    SegmentModel,
    SegmentModelKind,
    Segmentation,
)
from oracles import best_knots, best_partition, direct_cost, direct_set_cost
from services.cost_models import make_cost_provider
from services.segmentation import (
    backtrack,
    fit_summary,
    run_dp,
    run_knot_dp,
    segment_errors,
    summarize_set,
    summary_error,
)

KINDS = [
    SegmentModelKind(SegmentModel.CONSTANT_L2),
    SegmentModelKind(SegmentModel.CONSTANT_L1),
    SegmentModelKind(SegmentModel.LINE_L2),
    SegmentModelKind(SegmentModel.INTERP_L2),
    SegmentModelKind(SegmentModel.CONSTANT_L2, CurveAggregation.MAX),
]


def _solve(values, kind, p, aggregator):
    provider = make_cost_provider(values, kind)
    tables = run_dp(provider, max_segments=p, aggregator=aggregator)
    return tables, backtrack(tables, p), provider


def test_dp_matches_exhaustive_enumeration(rng):
    for instance in range(200):
        kind = KINDS[instance % len(KINDS)]
        aggregator = [SegmentAggregator.SUM, SegmentAggregator.MAX][(instance // len(KINDS)) % 2]
        m = int(rng.integers(4, 15))
        n_curves = 1 if instance % 3 else int(rng.integers(2, 4))
        values = rng.normal(size=(n_curves, m)).cumsum(axis=1)
        times = np.arange(1.0, m + 1)
        limit = m - 1 if kind.uses_knots else m
        p = int(rng.integers(1, min(5, limit) + 1))

        tables, partition, _ = _solve(values, kind, p, aggregator)

        def cost(k, l):
            return direct_set_cost(values, times, k, l, kind.model.value, kind.aggregation.value)

        if kind.uses_knots:
            expected, best, runner_up = best_knots(cost, m, p, aggregator.value)
            found = partition.knots
        else:
            expected, best, runner_up = best_partition(cost, m, p, aggregator.value)
            found = partition.breaks
        assert tables.optimal_cost(p) == pytest.approx(expected, rel=1e-9, abs=1e-9)
        if runner_up - expected > 1e-7 * max(1.0, abs(expected)):
            assert tuple(found) == tuple(best)


def test_ties_prefer_short_leading_segments():
    tables, partition, _ = _solve(np.ones(6), SegmentModelKind(), 3, SegmentAggregator.SUM)
    assert tables.optimal_cost(3) == 0.0
    assert partition == Segmentation((1, 2), 6)


def test_step_curve_is_fitted_exactly():
    curve = np.array([2.0, 2.0, 2.0, 7.0, 7.0])
    tables, partition, provider = _solve(curve, SegmentModelKind(), 2, SegmentAggregator.SUM)
    assert tables.optimal_cost(2) == 0.0
    assert partition == Segmentation((3,), 5)
    np.testing.assert_array_equal(fit_summary(provider, partition).params, [2.0, 7.0])


def test_constant_curve_has_zero_error_for_every_p():
    tables, _, _ = _solve(np.full(10, 3.5), SegmentModelKind(), 6, SegmentAggregator.SUM)
    np.testing.assert_array_equal(tables.optimal_costs(), np.zeros(6))


def test_single_segment_is_the_whole_curve(rng):
    curve = rng.normal(size=9)
    tables, partition, _ = _solve(curve, SegmentModelKind(), 1, SegmentAggregator.SUM)
    assert partition == Segmentation((), 9)
    assert tables.optimal_cost(1) == pytest.approx(direct_cost(curve, np.arange(9.0), 0, 8, "const-l2"))


def test_optimal_error_decreases_with_p(rng):
    tables, _, _ = _solve(rng.normal(size=30).cumsum(), SegmentModelKind(SegmentModel.LINE_L2), 10, "sum")
    errors = tables.optimal_costs()
    assert np.all(np.diff(errors) <= 1e-12)


def test_invalid_segment_counts():
    provider = make_cost_provider(np.arange(5.0), SegmentModelKind())
    with pytest.raises(DomainError):
        run_dp(provider, max_segments=6)
    tables = run_dp(provider, max_segments=3)
    with pytest.raises(DomainError):
        backtrack(tables, 4)
    with pytest.raises(DomainError):
        run_knot_dp(np.arange(5.0), 5)


def test_knot_dp_recovers_piecewise_linear_breakpoints(rng):
    for _ in range(50):
        m = int(rng.integers(20, 60))
        p = int(rng.integers(1, 6))
        knots = (0, *sorted(rng.choice(np.arange(2, m - 2), size=p - 1, replace=False)), m - 1)
        while np.any(np.diff(knots) < 2):
            knots = (0, *sorted(rng.choice(np.arange(2, m - 2), size=p - 1, replace=False)), m - 1)
        heights = rng.normal(0, 5, size=p + 1)
        # consecutive slopes must differ so every knot is a real kink
        heights[1::2] += 20.0
        t = np.arange(m, dtype=float)
        curve = np.interp(t, t[list(knots)], heights)

        found = run_knot_dp(curve, p)
        provider = make_cost_provider(curve, SegmentModelKind(SegmentModel.INTERP_L2))
        summary = fit_summary(provider, found)
        assert summary_error(curve, summary) < 1e-10
        assert found == KnotSet(tuple(int(k) for k in knots), m)


def test_knot_dp_matches_knot_enumeration(rng):
    for _ in range(30):
        m = int(rng.integers(3, 11))
        p = int(rng.integers(1, m))
        curve = rng.normal(size=m)
        times = np.arange(1.0, m + 1)
        found = run_knot_dp(curve, p)
        provider = make_cost_provider(curve, SegmentModelKind(SegmentModel.INTERP_L2))
        expected, best, runner_up = best_knots(lambda k, l: direct_cost(curve, times, k, l, "interp-l2"), m, p)
        assert summary_error(curve, fit_summary(provider, found)) == pytest.approx(expected, rel=1e-9, abs=1e-12)
        if runner_up - expected > 1e-9:
            assert found.knots == best


@pytest.mark.parametrize("kind", KINDS)
def test_segment_errors_reproduce_the_dp_objective(rng, kind):
    values = rng.normal(size=(4, 25)).cumsum(axis=1)
    p = 4
    tables, partition, provider = _solve(values, kind, p, SegmentAggregator.SUM)
    summary = fit_summary(provider, partition)
    errors = segment_errors(values, summary)
    assert errors.size == p
    assert errors.sum() == pytest.approx(tables.optimal_cost(p), rel=1e-8)


def test_interpolation_objective_is_the_total_squared_error(rng):
    values = rng.normal(size=(5, 30))
    tables, partition, provider = _solve(values, SegmentModelKind(SegmentModel.INTERP_L2), 6, "sum")
    summary = fit_summary(provider, partition)
    total = float(np.sum((values - summary.on_grid()) ** 2))
    assert tables.optimal_cost(6) == pytest.approx(total, rel=1e-9)


def test_fitted_levels_are_grand_means(rng):
    curves = CurveSet(SampleGrid.regular(20), rng.normal(size=(6, 20)))
    result = summarize_set(curves, SegmentModelKind(), 5, members=[0, 2, 3])
    summary = result.summaries[-1]
    for level, (a, b) in zip(summary.params, summary.segmentation.segments()):
        assert level == pytest.approx(curves.values[[0, 2, 3], a:b].mean(), abs=1e-12)


def test_summarize_set_returns_every_segment_count(rng):
    curves = CurveSet(SampleGrid.regular(15), rng.normal(size=(4, 15)))
    result = summarize_set(curves, SegmentModelKind(SegmentModel.LINE_L2), 5)
    assert [s.n_segments for s in result.summaries] == [1, 2, 3, 4, 5]
    for p, summary in enumerate(result.summaries, start=1):
        assert summary_error(curves.values, summary) == pytest.approx(result.tables.optimal_cost(p), rel=1e-8)


@pytest.mark.perf
def test_dp_time_is_quadratic_in_the_number_of_points(rng):
    def elapsed(m):
        provider = make_cost_provider(rng.normal(size=m), SegmentModelKind())
        best = np.inf
        for _ in range(3):
            start = time.perf_counter()
            run_dp(provider, max_segments=20)
            best = min(best, time.perf_counter() - start)
        return best

    small, large = elapsed(1000), elapsed(2000)
    assert 3.0 <= large / small <= 5.0
    assert large < 2.0
