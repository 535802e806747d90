"""Exact dynamic programming over ordered partitions and interpolation knots."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from models.curves import CurveSet, SampleGrid
from models.errors import DomainError, InternalConsistencyError
from models.summary import (
    CurveAggregation,
    KnotSet,
    Partition,
    SegmentAggregator,
    SegmentModel,
    SegmentModelKind,
    Segmentation,
    Summary,
)
from services.cost_models import SegmentCostProvider, make_cost_provider

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DPTables:
    """Optimal suffix costs and winner splits.

    ``F[k, j]`` is the best cost of covering indices k..M-1 with j segments
    (infinite when impossible); ``W[k, j]`` is the last index of the first
    segment of that optimum, -1 where undefined. For knot tables a segment
    ending at l is followed by one starting at l.
    """

    F: np.ndarray
    W: np.ndarray
    n_points: int
    max_segments: int
    aggregator: SegmentAggregator
    shares_knots: bool

    def optimal_cost(self, p: int) -> float:
        self._check_p(p)
        return float(self.F[0, p])

    def optimal_costs(self) -> np.ndarray:
        """F(0, p) for p = 1..max_segments."""
        return self.F[0, 1:].copy()

    def _check_p(self, p: int) -> None:
        if not 1 <= p <= self.max_segments:
            raise DomainError(f"p={p} outside 1..{self.max_segments}")


def run_dp(
    cost: SegmentCostProvider,
    n_points: Optional[int] = None,
    max_segments: int = 1,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
) -> DPTables:
    """
    Fill the tables for every segment count 1..max_segments in one pass.

    Candidate splits are scanned in increasing order and only a strict
    improvement replaces the incumbent, so short leading segments win ties.

    Args:
        cost: Segment costs of one curve or one member set
        n_points: Grid size M, checked against the provider when given
        max_segments: Largest segment count P to solve for
        aggregator: Combine segment costs by sum or by max

    Returns:
        DPTables with the optimal cost and winning split for every (start, p)
    """
    aggregator = SegmentAggregator(aggregator)
    n = cost.n_points if n_points is None else n_points
    if n != cost.n_points:
        raise DomainError(f"M={n} does not match the cost provider ({cost.n_points} points)")
    limit = n - 1 if cost.shares_knots else n
    if not 1 <= max_segments <= limit:
        raise DomainError(f"P={max_segments} must lie in 1..{limit} for M={n}")

    # next segment starts at l + step; the empty suffix lives at index `terminal`
    step = 0 if cost.shares_knots else 1
    terminal = n - 1 if cost.shares_knots else n
    combine = np.add if aggregator is SegmentAggregator.SUM else np.maximum

    F = np.full((n + 1, max_segments + 1), np.inf)
    W = np.full((n + 1, max_segments + 1), -1, dtype=np.int64)
    F[terminal, 0] = 0.0

    for k in range(terminal - 1, -1, -1):
        row = cost.costs_from(k)
        if not np.all(np.isfinite(row)):
            raise InternalConsistencyError(f"non-finite segment cost in row k={k}")
        ends = np.arange(k + cost.min_span, n)
        candidates = combine(row[:, None], F[ends + step, :max_segments])
        best = np.argmin(candidates, axis=0)
        values = candidates[best, np.arange(max_segments)]
        F[k, 1:] = values
        W[k, 1:] = np.where(np.isfinite(values), ends[best], -1)

    logger.debug(f"DP filled: M={n}, P={max_segments}, aggregator={aggregator.value}")
    return DPTables(
        F=F,
        W=W,
        n_points=n,
        max_segments=max_segments,
        aggregator=aggregator,
        shares_knots=cost.shares_knots,
    )


def backtrack(tables: DPTables, p: int) -> Partition:
    """Optimal segmentation (or knot set) with p segments."""
    tables._check_p(p)
    step = 0 if tables.shares_knots else 1
    k, ends = 0, []
    for j in range(p, 0, -1):
        l = int(tables.W[k, j])
        if l < 0:
            raise InternalConsistencyError(f"no winner split recorded at k={k}, j={j}")
        ends.append(l)
        k = l + step

    if tables.shares_knots:
        return KnotSet((0, *ends), tables.n_points)
    return Segmentation(tuple(end + 1 for end in ends[:-1]), tables.n_points)


def fit_summary(cost: SegmentCostProvider, partition: Partition) -> Summary:
    """Optimal per-segment parameters of the provider's data on a fixed partition."""
    if partition.n_points != cost.n_points:
        raise DomainError("partition does not match the bound data")
    return Summary(cost.kind, partition, cost.fit_params(partition), cost.grid)


def run_knot_dp(curve: Sequence[float], n_segments: int, grid: Optional[SampleGrid] = None) -> KnotSet:
    """Best P + 1 interpolation knots for one curve (continuous piecewise-linear fit)."""
    values = np.asarray(curve, dtype=np.float64)
    if not 1 <= n_segments <= values.size - 1:
        raise DomainError(f"P={n_segments} must lie in 1..{values.size - 1}")
    provider = make_cost_provider(values, SegmentModelKind(SegmentModel.INTERP_L2), grid=grid)
    return backtrack(run_dp(provider, max_segments=n_segments), n_segments)


def segment_errors(values: np.ndarray, summary: Summary) -> np.ndarray:
    """Error of each segment of ``summary`` against the rows of ``values``, from scratch.

    Sum-over-curves errors add every member's squared (absolute for L1)
    deviation; the max mode keeps the worst member per segment. Chord
    segments count a shared knot column once, in the segment it starts.
    """
    values = np.atleast_2d(values)
    deviation = values - summary.on_grid()
    if summary.kind.is_l1:
        pointwise = np.abs(deviation)
    else:
        pointwise = deviation * deviation

    if isinstance(summary.segmentation, KnotSet):
        columns = pointwise.sum(axis=0)
        knots = summary.segmentation.knots
        errors = [columns[a:b].sum() for a, b in zip(knots[:-1], knots[1:])]
        errors[-1] += columns[-1]
        return np.array(errors)

    bounds = summary.segmentation.segments()
    if summary.kind.aggregation is CurveAggregation.MAX:
        return np.array([pointwise[:, a:b].sum(axis=1).max() for a, b in bounds])
    return np.array([pointwise[:, a:b].sum() for a, b in bounds])


def summary_error(
    values: np.ndarray,
    summary: Summary,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
) -> float:
    errors = segment_errors(values, summary)
    if SegmentAggregator(aggregator) is SegmentAggregator.MAX:
        return float(errors.max())
    return float(errors.sum())


@dataclass(frozen=True)
class SetSummary:
    tables: DPTables
    summaries: tuple[Summary, ...]


def summarize_set(
    curves: Union[CurveSet, np.ndarray],
    kind: SegmentModelKind,
    max_segments: int,
    members: Optional[Sequence[int]] = None,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
    grid: Optional[SampleGrid] = None,
) -> SetSummary:
    """Single optimal summary of a (homogeneous) set for every p = 1..max_segments."""
    provider = make_cost_provider(curves, kind, members=members, grid=grid)
    tables = run_dp(provider, max_segments=max_segments, aggregator=aggregator)
    summaries = tuple(
        fit_summary(provider, backtrack(tables, p)) for p in range(1, max_segments + 1)
    )
    logger.info(
        f"Summarized {provider.kind} set on {provider.n_points} points with up to {max_segments} segments"
    )
    return SetSummary(tables=tables, summaries=summaries)
