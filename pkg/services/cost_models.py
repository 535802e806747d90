"""Segment cost models Q(s, {t_k..t_l}) and Q(G, {t_k..t_l}).

All indices are 0-based and inclusive (k <= l). Quadratic costs are answered
in O(1) from prefix sums; the L1 and max-over-curves costs are solved per
query. Every function accepts a scalar ``l`` or an integer array of ``l``
values so the dynamic program can ask for a whole row at once.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from models.curves import CurveSet, SampleGrid
from models.errors import DomainError, InternalConsistencyError
from models.summary import (
    CurveAggregation,
    KnotSet,
    Partition,
    SegmentModel,
    SegmentModelKind,
    Segmentation,
)

logger = logging.getLogger(__name__)

IndexLike = Union[int, np.ndarray]

# Relative slack tolerated before a negative sum of squares is an error
CANCELLATION_TOLERANCE = 1e-9

# Bisection resolution on the level a of the max-over-curves cost
BISECTION_TOLERANCE = 1e-12


def _prefix(values: np.ndarray) -> np.ndarray:
    out = np.zeros(values.shape[:-1] + (values.shape[-1] + 1,), dtype=np.float64)
    np.cumsum(values, axis=-1, out=out[..., 1:])
    return out


def _window(prefix: np.ndarray, k: IndexLike, l: IndexLike) -> np.ndarray:
    return prefix[..., np.asarray(l) + 1] - prefix[..., np.asarray(k)]


def _scalar_or_array(result: np.ndarray, l: IndexLike):
    return float(result) if np.ndim(l) == 0 else result


def _checked(q: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Clamp rounding noise below zero; anything larger is a bug."""
    q = np.asarray(q, dtype=np.float64)
    negative = q < 0
    if np.any(negative):
        if np.any(q[negative] < -CANCELLATION_TOLERANCE * np.broadcast_to(scale, q.shape)[negative]):
            worst = float(q[negative].min())
            raise InternalConsistencyError(f"segment sum of squares is negative ({worst:.3e})")
        q = np.where(negative, 0.0, q)
    return q


def _check_bounds(n_points: int, k: IndexLike, l: IndexLike, min_span: int = 0) -> None:
    k_arr, l_arr = np.asarray(k), np.asarray(l)
    if np.any(k_arr < 0) or np.any(l_arr > n_points - 1) or np.any(l_arr - k_arr < min_span):
        raise DomainError(f"invalid segment bounds k={k}, l={l} for M={n_points}")


@dataclass(frozen=True, eq=False)
class PrefixStats:
    """Prefix sums of one curve; entry j aggregates indices 0..j-1.

    Abscissae enter the sums centred on the grid mean (``time_offset``) and
    values centred on the curve mean (``value_offset``), so costs do not
    depend on the curve's level or on large t values. ``values`` stays raw.
    """

    values: np.ndarray
    times: np.ndarray
    time_offset: float
    value_offset: float
    s1: np.ndarray
    s2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    ts: np.ndarray

    @property
    def n_points(self) -> int:
        return int(self.values.size)


def build_prefix_stats(curve: Sequence[float], grid: Optional[SampleGrid] = None) -> PrefixStats:
    """Sufficient statistics for O(1) constant, line and chord costs."""
    values = np.asarray(curve, dtype=np.float64).ravel()
    if not np.all(np.isfinite(values)):
        raise DomainError("curve values must be finite")
    points = SampleGrid.regular(values.size).points if grid is None else grid.points
    if points.size != values.size:
        raise DomainError(f"curve has {values.size} values but the grid has {points.size} points")

    time_offset = float(points.mean())
    times = points - time_offset
    value_offset = float(values.mean())
    centred = values - value_offset
    return PrefixStats(
        values=values,
        times=times,
        time_offset=time_offset,
        value_offset=value_offset,
        s1=_prefix(centred),
        s2=_prefix(centred * centred),
        t1=_prefix(times),
        t2=_prefix(times * times),
        ts=_prefix(times * centred),
    )


def cost_constant_l2(stats: PrefixStats, k: int, l: IndexLike):
    """Sum of squared deviations from the segment mean."""
    _check_bounds(stats.n_points, k, l)
    n = np.asarray(l) - k + 1
    s = _window(stats.s1, k, l)
    ss = _window(stats.s2, k, l)
    q = _checked(ss - s * s / n, ss)
    return _scalar_or_array(np.where(n == 1, 0.0, q), l)


def cost_constant_l1(stats: PrefixStats, k: int, l: IndexLike):
    """Sum of absolute deviations from the segment median."""
    _check_bounds(stats.n_points, k, l)
    ls = np.atleast_1d(np.asarray(l))
    out = np.empty(ls.size, dtype=np.float64)
    for i, last in enumerate(ls):
        segment = stats.values[k:last + 1]
        out[i] = np.abs(segment - np.median(segment)).sum()
    return _scalar_or_array(out[0] if np.ndim(l) == 0 else out, l)


def cost_line_l2(stats: PrefixStats, k: int, l: IndexLike):
    """Residual sum of squares of the least-squares line on the segment."""
    _check_bounds(stats.n_points, k, l)
    n = np.asarray(l) - k + 1
    st = _window(stats.t1, k, l)
    stt = _window(stats.t2, k, l)
    s = _window(stats.s1, k, l)
    ss = _window(stats.s2, k, l)
    sts = _window(stats.ts, k, l)

    sxx = stt - st * st / n
    sxy = sts - st * s / n
    syy = ss - s * s / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rss = syy - np.where(sxx > 0, sxy * sxy / np.where(sxx > 0, sxx, 1.0), 0.0)
    q = _checked(rss, ss)
    return _scalar_or_array(np.where(n <= 2, 0.0, q), l)


def cost_interp_l2(stats: PrefixStats, k: int, l: IndexLike):
    """Squared error of the chord through (t_k, s_k) and (t_l, s_l) over k..l."""
    _check_bounds(stats.n_points, k, l, min_span=1)
    ls = np.asarray(l)
    n = ls - k + 1
    slope = (stats.values[ls] - stats.values[k]) / (stats.times[ls] - stats.times[k])
    intercept = (stats.values[k] - stats.value_offset) - slope * stats.times[k]

    st = _window(stats.t1, k, l)
    stt = _window(stats.t2, k, l)
    s = _window(stats.s1, k, l)
    ss = _window(stats.s2, k, l)
    sts = _window(stats.ts, k, l)

    rss = (
        ss - 2.0 * intercept * s - 2.0 * slope * sts
        + n * intercept * intercept + 2.0 * intercept * slope * st + slope * slope * stt
    )
    scale = ss + n * intercept * intercept + slope * slope * stt
    q = _checked(rss, scale)
    return _scalar_or_array(np.where(n <= 2, 0.0, q), l)


@dataclass(frozen=True, eq=False)
class SetStats:
    """Huygens decomposition of a member set: mean-curve stats plus residual."""

    mean: PrefixStats
    residual_columns: np.ndarray
    residual: np.ndarray
    n_members: int

    @property
    def n_points(self) -> int:
        return self.mean.n_points

    def residual_between(self, k: int, l: IndexLike) -> np.ndarray:
        return _window(self.residual, k, l)


def _member_values(curves: Union[CurveSet, np.ndarray], members: Optional[Sequence[int]]) -> np.ndarray:
    if isinstance(curves, CurveSet):
        return curves.values if members is None else curves.members(members)
    values = np.atleast_2d(np.asarray(curves, dtype=np.float64))
    if members is not None:
        members = np.asarray(members, dtype=np.int64)
        if members.size == 0:
            raise DomainError("a member subset must not be empty")
        values = values[members]
    return values


def build_set_stats(
    curves: Union[CurveSet, np.ndarray],
    members: Optional[Sequence[int]] = None,
    grid: Optional[SampleGrid] = None,
) -> SetStats:
    """Mean curve of the members and the segmentation-independent residual."""
    values = _member_values(curves, members)
    if values.shape[0] == 0:
        raise DomainError("a member subset must not be empty")
    if grid is None and isinstance(curves, CurveSet):
        grid = curves.grid

    mean = values.mean(axis=0)
    deviations = values - mean
    residual_columns = np.sum(deviations * deviations, axis=0)
    return SetStats(
        mean=build_prefix_stats(mean, grid),
        residual_columns=residual_columns,
        residual=_prefix(residual_columns),
        n_members=int(values.shape[0]),
    )


_MEAN_CURVE_COSTS = {
    SegmentModel.CONSTANT_L2: cost_constant_l2,
    SegmentModel.LINE_L2: cost_line_l2,
    SegmentModel.INTERP_L2: cost_interp_l2,
}


def cost_set_sum(setstats: SetStats, k: int, l: IndexLike, model: SegmentModel = SegmentModel.CONSTANT_L2):
    """min over the model of sum_i sum_j (s_i(t_j) - model(t_j))^2, via the mean curve.

    Constant and line models add the residual of columns k..l. Chords differ
    on purpose: adjacent chords share their knot column, so a chord adds the
    residual of the half-open range [k, l), plus column l only when l is the
    last grid point. Summed over a knot set every column is counted once,
    which the closed per-segment range k..l would not give.
    """
    model = SegmentModel(model)
    if model not in _MEAN_CURVE_COSTS:
        raise DomainError(f"{model.value} has no mean-curve reduction")
    mean_cost = np.asarray(_MEAN_CURVE_COSTS[model](setstats.mean, k, l))
    ls = np.asarray(l)
    if model is SegmentModel.INTERP_L2:
        residual = _window(setstats.residual, k, ls - 1) + np.where(
            ls == setstats.n_points - 1, setstats.residual_columns[ls], 0.0
        )
    else:
        residual = setstats.residual_between(k, ls)
    return _scalar_or_array(setstats.n_members * mean_cost + residual, l)


def cost_set_l1(values: np.ndarray, k: int, l: IndexLike):
    """Sum of absolute deviations of all member values from their pooled median."""
    values = np.atleast_2d(values)
    _check_bounds(values.shape[1], k, l)
    ls = np.atleast_1d(np.asarray(l))
    out = np.empty(ls.size, dtype=np.float64)
    for i, last in enumerate(ls):
        block = values[:, k:last + 1]
        out[i] = np.abs(block - np.median(block)).sum()
    return _scalar_or_array(out[0] if np.ndim(l) == 0 else out, l)


def _max_constant_solve(means: np.ndarray, sse: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimise a -> max_i n (a - means_i)^2 + sse_i column-wise by bisection.

    ``means`` and ``sse`` are (members, segments); ``n`` is (segments,).
    The pieces share the curvature n, so the active piece at a tells on which
    side of the optimum a lies.
    """
    lo = means.min(axis=0)
    hi = means.max(axis=0)
    tolerance = np.maximum(BISECTION_TOLERANCE, 4 * np.finfo(np.float64).eps * np.abs(means).max(axis=0))
    columns = np.arange(means.shape[1])

    for _ in range(200):
        open_ = (hi - lo) > tolerance
        if not np.any(open_):
            break
        mid = 0.5 * (lo + hi)
        active = np.argmax(n * (mid - means) ** 2 + sse, axis=0)
        right_of_optimum = mid > means[active, columns]
        hi = np.where(open_ & right_of_optimum, mid, hi)
        lo = np.where(open_ & ~right_of_optimum, mid, lo)

    level = 0.5 * (lo + hi)
    value = np.max(n * (level - means) ** 2 + sse, axis=0)
    return level, value


def _member_segment_moments(prefix1: np.ndarray, prefix2: np.ndarray, k: int, ls: np.ndarray):
    n = ls - k + 1
    s = _window(prefix1, k, ls)
    ss = _window(prefix2, k, ls)
    means = s / n
    sse = _checked(ss - s * s / n, ss)
    sse = np.where(n == 1, 0.0, sse)
    return means, sse, n


def cost_set_max(values: np.ndarray, k: int, l: IndexLike):
    """min_a max_i sum_{j=k..l} (s_i(t_j) - a)^2 over the member rows of ``values``."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    _check_bounds(values.shape[1], k, l)
    ls = np.atleast_1d(np.asarray(l))
    centred = values - values.mean()
    means, sse, n = _member_segment_moments(_prefix(centred), _prefix(centred * centred), k, ls)
    _, value = _max_constant_solve(means, sse, n)
    return _scalar_or_array(value[0] if np.ndim(l) == 0 else value, l)


class SegmentCostProvider(ABC):
    """Answers cost(k, l) for one curve or one member set under a fixed model."""

    def __init__(self, kind: SegmentModelKind, grid: SampleGrid):
        self.kind = kind
        self.grid = grid

    @property
    def n_points(self) -> int:
        return self.grid.size

    @property
    def shares_knots(self) -> bool:
        """Adjacent segments share their boundary point (interpolation chords)."""
        return self.kind.uses_knots

    @property
    def min_span(self) -> int:
        return 1 if self.shares_knots else 0

    @abstractmethod
    def costs(self, k: int, ls: np.ndarray) -> np.ndarray:
        """cost(k, l) for every l in ``ls``."""

    @abstractmethod
    def fit(self, start: int, last: int) -> np.ndarray:
        """Optimal parameters on the closed index range start..last."""

    def cost(self, k: int, l: int) -> float:
        return float(self.costs(k, np.array([l]))[0])

    def costs_from(self, k: int) -> np.ndarray:
        """Row of costs for every admissible end index l >= k + min_span."""
        return self.costs(k, np.arange(k + self.min_span, self.n_points))

    def fit_params(self, partition: Partition) -> np.ndarray:
        if isinstance(partition, KnotSet):
            return self.knot_values(partition)
        return np.array([self.fit(start, stop - 1) for start, stop in partition.segments()])

    def knot_values(self, knots: KnotSet) -> np.ndarray:
        raise DomainError(f"{self.kind.model.value} summaries have no knots")


class MeanCurveCost(SegmentCostProvider):
    """Sum-over-curves quadratic models, reduced to the mean curve (Huygens)."""

    def __init__(self, stats: SetStats, kind: SegmentModelKind, grid: SampleGrid):
        super().__init__(kind, grid)
        self.stats = stats

    def costs(self, k: int, ls: np.ndarray) -> np.ndarray:
        return np.asarray(cost_set_sum(self.stats, k, np.asarray(ls), self.kind.model))

    def fit(self, start: int, last: int) -> np.ndarray:
        mean = self.stats.mean.values[start:last + 1]
        if self.kind.model is SegmentModel.LINE_L2:
            t = self.grid.points[start:last + 1]
            if t.size == 1:
                return np.array([0.0, float(mean[0])])
            dt = t - t.mean()
            slope = float(np.dot(dt, mean - mean.mean()) / np.dot(dt, dt))
            return np.array([slope, float(mean.mean() - slope * t.mean())])
        return np.float64(np.mean(mean))

    def knot_values(self, knots: KnotSet) -> np.ndarray:
        return self.stats.mean.values[np.asarray(knots.knots)].copy()


class PooledL1Cost(SegmentCostProvider):
    """Constant level at the median of all member values on the segment."""

    def __init__(self, values: np.ndarray, kind: SegmentModelKind, grid: SampleGrid):
        super().__init__(kind, grid)
        self.values = values
        self._single = build_prefix_stats(values[0], grid) if values.shape[0] == 1 else None

    def costs(self, k: int, ls: np.ndarray) -> np.ndarray:
        if self._single is not None:
            return np.atleast_1d(cost_constant_l1(self._single, k, np.asarray(ls)))
        return np.atleast_1d(cost_set_l1(self.values, k, np.asarray(ls)))

    def fit(self, start: int, last: int) -> np.ndarray:
        return np.float64(np.median(self.values[:, start:last + 1]))


class MaxConstantCost(SegmentCostProvider):
    """Constant level minimising the worst member's squared error."""

    def __init__(self, values: np.ndarray, kind: SegmentModelKind, grid: SampleGrid):
        super().__init__(kind, grid)
        self.values = values
        # shared by all members; fit adds it back to the level
        self._offset = float(values.mean())
        centred = values - self._offset
        self._s1 = _prefix(centred)
        self._s2 = _prefix(centred * centred)

    def costs(self, k: int, ls: np.ndarray) -> np.ndarray:
        ls = np.atleast_1d(np.asarray(ls))
        _check_bounds(self.n_points, k, ls)
        means, sse, n = _member_segment_moments(self._s1, self._s2, k, ls)
        return _max_constant_solve(means, sse, n)[1]

    def fit(self, start: int, last: int) -> np.ndarray:
        means, sse, n = _member_segment_moments(self._s1, self._s2, start, np.array([last]))
        return np.float64(_max_constant_solve(means, sse, n)[0][0] + self._offset)


def make_cost_provider(
    curves: Union[CurveSet, np.ndarray],
    kind: SegmentModelKind,
    members: Optional[Sequence[int]] = None,
    grid: Optional[SampleGrid] = None,
) -> SegmentCostProvider:
    """Provider for one curve (a 1-D array) or a set of member curves."""
    if isinstance(curves, CurveSet):
        grid = curves.grid
    values = _member_values(curves, members)
    if grid is None:
        grid = SampleGrid.regular(values.shape[1])

    if kind.aggregation is CurveAggregation.MAX:
        return MaxConstantCost(values, kind, grid)
    if kind.model is SegmentModel.CONSTANT_L1:
        return PooledL1Cost(values, kind, grid)
    return MeanCurveCost(build_set_stats(values, grid=grid), kind, grid)
