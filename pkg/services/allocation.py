"""Distribution of a global segment budget across clusters."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from models.curves import CurveSet
from models.errors import DomainError
from models.summary import SegmentAggregator, SegmentModelKind
from services.cost_models import make_cost_provider
from services.executor import parallel_map
from services.segmentation import DPTables, run_dp

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AllocationTables:
    """R (clusters x columns), S and winner tables of the budget DP.

    ``R[k, p - 1]`` is cluster k's optimal error with p segments;
    ``S[l, p]`` the best total error of clusters 0..l using exactly p
    segments; ``Wa[l, p]`` the segments given to cluster l in that optimum.
    """

    R: np.ndarray
    S: np.ndarray
    Wa: np.ndarray
    counts: tuple[int, ...]
    cost: float


def cluster_members(assignment: np.ndarray, n_clusters: int) -> list[np.ndarray]:
    members = [np.flatnonzero(assignment == k) for k in range(n_clusters)]
    empty = [k for k, m in enumerate(members) if m.size == 0]
    if empty:
        raise DomainError(f"clusters {empty} are empty")
    return members


def build_cluster_tables(
    curves: CurveSet,
    assignment: Union[np.ndarray, Sequence[int]],
    kind: SegmentModelKind,
    max_segments: int,
    n_clusters: Optional[int] = None,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
) -> list[DPTables]:
    """One segmentation DP per cluster, run concurrently."""
    assignment = np.asarray(assignment, dtype=np.int64)
    n_clusters = int(assignment.max()) + 1 if n_clusters is None else n_clusters
    members = cluster_members(assignment, n_clusters)

    def solve(indices: np.ndarray) -> DPTables:
        provider = make_cost_provider(curves, kind, members=indices)
        return run_dp(provider, max_segments=max_segments, aggregator=aggregator)

    return parallel_map(solve, members)


def build_R(
    curves: CurveSet,
    assignment: Union[np.ndarray, Sequence[int]],
    kind: SegmentModelKind,
    max_segments: int,
    n_clusters: Optional[int] = None,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
) -> np.ndarray:
    """R[k, p - 1] = optimal segmentation error of cluster k with p segments."""
    if max_segments > curves.n_points:
        raise DomainError(f"P_max={max_segments} exceeds M={curves.n_points}")
    tables = build_cluster_tables(curves, assignment, kind, max_segments, n_clusters, aggregator)
    return np.vstack([t.optimal_costs() for t in tables])


def allocate(R: np.ndarray, n_segments: int, cap: Optional[int] = None) -> AllocationTables:
    """
    Split P segments over the K rows of R minimising sum_k R[k, P_k - 1].

    The scan over u is increasing with strict improvement, so the smallest
    u wins ties.

    Args:
        R: Optimal error of cluster k with p segments at R[k, p - 1]
        n_segments: Total budget P, at least K
        cap: Upper bound on the segments of any one cluster

    Returns:
        AllocationTables holding the S and Wa tables, the counts and the cost

    Raises:
        DomainError: If P < K or P exceeds what the columns and cap allow
    """
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    n_clusters, n_columns = R.shape
    if n_segments < n_clusters:
        raise DomainError(f"P={n_segments} is smaller than K={n_clusters}")
    if cap is not None and cap < 1:
        raise DomainError("cap must be at least 1")
    per_cluster = n_columns if cap is None else min(cap, n_columns)
    if per_cluster * n_clusters < n_segments:
        raise DomainError(
            f"P={n_segments} cannot be allocated to K={n_clusters} clusters with at most {per_cluster} each"
        )

    S = np.full((n_clusters, n_segments + 1), np.inf)
    Wa = np.zeros((n_clusters, n_segments + 1), dtype=np.int64)
    first = min(per_cluster, n_segments)
    S[0, 1:first + 1] = R[0, :first]
    Wa[0, 1:first + 1] = np.arange(1, first + 1)

    for l in range(1, n_clusters):
        for p in range(l + 1, n_segments + 1):
            us = np.arange(1, min(p - l, per_cluster) + 1)
            candidates = S[l - 1, p - us] + R[l, us - 1]
            best = int(np.argmin(candidates))
            if np.isfinite(candidates[best]):
                S[l, p] = candidates[best]
                Wa[l, p] = us[best]

    counts = []
    available = n_segments
    for l in range(n_clusters - 1, -1, -1):
        u = int(Wa[l, available])
        counts.append(u)
        available -= u
    counts.reverse()

    cost = float(S[n_clusters - 1, n_segments])
    logger.debug(f"Allocation {counts} with cost {cost:.6g}")
    return AllocationTables(R=R, S=S, Wa=Wa, counts=tuple(counts), cost=cost)
