"""Joint clustering and summarization by alternating minimization.

One engine drives every variant: fit prototypes on the current partition,
record the error, reassign each curve to its nearest prototype, repeat until
the partition is stable. The variants differ only in how prototypes are
fitted: unconstrained means (K-means), piecewise summaries with P/K segments
each (uniform), or summaries whose segment counts come from the budget DP
(optimal).
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from models.curves import CurveSet
from models.errors import ConfigurationError, DomainError
from models.state import ClusterState, ClusteringConfig, ClusteringMode, InitMethod
from models.summary import CurveAggregation, SegmentAggregator, SegmentModelKind, Summary
from services.allocation import allocate, build_cluster_tables, cluster_members
from services.cost_models import make_cost_provider
from services.executor import parallel_map
from services.segmentation import backtrack, fit_summary, run_dp, summary_error

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fit:
    """Prototypes fitted on one partition."""

    prototypes: np.ndarray
    summaries: tuple[Summary, ...] = ()
    allocation: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignment: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    trace: tuple[float, ...]
    converged: bool


@dataclass(frozen=True, eq=False)
class TwoPhaseResult:
    kmeans: KMeansResult
    summarized_error: float
    state: ClusterState


@dataclass(frozen=True, eq=False)
class RestartResult:
    seeds: tuple[int, ...]
    states: tuple[ClusterState, ...]

    @property
    def best_index(self) -> int:
        return min(range(len(self.states)), key=lambda i: (self.states[i].error, self.seeds[i]))

    @property
    def best(self) -> ClusterState:
        return self.states[self.best_index]

    @property
    def best_seed(self) -> int:
        return self.seeds[self.best_index]


def random_partition(n_curves: int, n_clusters: int, seed: int) -> np.ndarray:
    """Shuffle the curves with a seeded generator and deal them round-robin."""
    if not 1 <= n_clusters <= n_curves:
        raise ConfigurationError(f"K={n_clusters} must lie in 1..N={n_curves}")
    order = np.random.default_rng(seed).permutation(n_curves)
    assignment = np.empty(n_curves, dtype=np.int64)
    assignment[order] = np.arange(n_curves) % n_clusters
    return assignment


def distances(values: np.ndarray, prototypes: np.ndarray, l1: bool = False) -> np.ndarray:
    """(N, K) grid distances: squared L2, or L1 for median-based models."""
    deviation = values[:, None, :] - prototypes[None, :, :]
    if l1:
        return np.abs(deviation).sum(axis=2)
    return (deviation * deviation).sum(axis=2)


def assign_step(curves: CurveSet, summaries: Sequence[Summary]) -> np.ndarray:
    """Nearest summary for each curve; ties go to the smallest cluster index."""
    prototypes = np.vstack([s.on_grid() for s in summaries])
    l1 = any(s.kind.is_l1 for s in summaries)
    return np.argmin(distances(curves.values, prototypes, l1), axis=1)


def _repair_empty(
    values: np.ndarray, assignment: np.ndarray, prototypes: np.ndarray, l1: bool
) -> np.ndarray:
    """Reseed each empty cluster with the curve farthest from its own prototype.

    Only curves in clusters of size >= 2 are eligible; the smallest index
    wins ties.
    """
    n_clusters = prototypes.shape[0]
    sizes = np.bincount(assignment, minlength=n_clusters)
    if np.all(sizes > 0):
        return assignment

    assignment = assignment.copy()
    own = distances(values, prototypes, l1)[np.arange(values.shape[0]), assignment]
    for empty in np.flatnonzero(sizes == 0):
        eligible = sizes[assignment] >= 2
        if not np.any(eligible):
            raise DomainError("cannot repair an empty cluster: every cluster is a singleton")
        candidate = int(np.argmax(np.where(eligible, own, -np.inf)))
        logger.warning(f"Cluster {empty} emptied; reseeded with curve {candidate}")
        sizes[assignment[candidate]] -= 1
        sizes[empty] += 1
        assignment[candidate] = empty
        own[candidate] = -np.inf
    return assignment


def _deviation_error(values: np.ndarray, prototype: np.ndarray, l1: bool) -> float:
    deviation = values - prototype
    if l1:
        return float(np.sum(np.abs(deviation)))
    return float(np.sum(deviation * deviation))


def _partition_error(
    values: np.ndarray,
    assignment: np.ndarray,
    fit: Fit,
    l1: bool,
    aggregator: SegmentAggregator,
) -> float:
    total = 0.0
    for k in range(fit.prototypes.shape[0]):
        members = values[assignment == k]
        if fit.summaries and not _is_additive(fit.summaries[k].kind, aggregator):
            total += summary_error(members, fit.summaries[k], aggregator)
        else:
            total += _deviation_error(members, fit.prototypes[k], l1)
    return total


def _is_additive(kind: SegmentModelKind, aggregator: SegmentAggregator) -> bool:
    """True when the cluster error is a plain sum over curves and grid points."""
    return kind.aggregation is CurveAggregation.SUM and aggregator is SegmentAggregator.SUM


def _alternate(
    curves: CurveSet,
    initial: np.ndarray,
    n_clusters: int,
    fit_partition: Callable[[np.ndarray], Fit],
    l1: bool,
    max_iter: int,
    aggregator: SegmentAggregator = SegmentAggregator.SUM,
    label: str = "clustering",
) -> tuple[np.ndarray, Fit, list[float], bool]:
    """Run the alternating loop; returns (assignment, fit, trace, converged).

    The loop also stops, keeping the previous state, if a fit would raise
    the error (possible after an empty-cluster repair or with non-additive
    aggregation).
    """
    values = curves.values
    assignment = np.asarray(initial, dtype=np.int64).copy()
    cluster_members(assignment, n_clusters)

    trace: list[float] = []
    previous: Optional[tuple[np.ndarray, Fit]] = None
    converged = False

    for iteration in range(1, max_iter + 1):
        fit = fit_partition(assignment)
        error = _partition_error(values, assignment, fit, l1, aggregator)
        if trace and error > trace[-1]:
            logger.warning(
                f"{label}: E would rise from {trace[-1]:.6g} to {error:.6g}; keeping iteration {len(trace)}"
            )
            break
        trace.append(error)
        previous = (assignment, fit)
        logger.debug(f"{label} iteration {iteration}: E={error:.10g} allocation={list(fit.allocation)}")

        updated = np.argmin(distances(values, fit.prototypes, l1), axis=1)
        updated = _repair_empty(values, updated, fit.prototypes, l1)
        if np.array_equal(updated, assignment):
            converged = True
            break
        assignment = updated

    # the returned partition is always the one the last recorded fit was made on
    assignment, fit = previous
    logger.info(
        f"{label}: {len(trace)} iterations, E={trace[-1]:.6g}, converged={converged}"
    )
    return assignment, fit, trace, converged


def _uniform_fitter(curves: CurveSet, config: ClusteringConfig) -> Callable[[np.ndarray], Fit]:
    per_cluster = config.segments_per_cluster

    def fit_partition(assignment: np.ndarray) -> Fit:
        members = cluster_members(assignment, config.n_clusters)

        def summarize(indices: np.ndarray) -> Summary:
            provider = make_cost_provider(curves, config.kind, members=indices)
            tables = run_dp(provider, max_segments=per_cluster, aggregator=config.aggregator)
            return fit_summary(provider, backtrack(tables, per_cluster))

        summaries = tuple(parallel_map(summarize, members))
        return Fit(
            prototypes=np.vstack([s.on_grid() for s in summaries]),
            summaries=summaries,
            allocation=(per_cluster,) * config.n_clusters,
        )

    return fit_partition


def _allocation_columns(config: ClusteringConfig, n_points: int) -> int:
    limit = n_points - 1 if config.kind.uses_knots else n_points
    columns = min(config.n_segments - config.n_clusters + 1, limit)
    if config.cap is not None:
        columns = min(columns, config.cap)
    return columns


def _optimal_fitter(curves: CurveSet, config: ClusteringConfig) -> Callable[[np.ndarray], Fit]:
    columns = _allocation_columns(config, curves.n_points)

    def fit_partition(assignment: np.ndarray) -> Fit:
        members = cluster_members(assignment, config.n_clusters)
        tables = build_cluster_tables(
            curves, assignment, config.kind, columns, config.n_clusters, config.aggregator
        )
        R = np.vstack([t.optimal_costs() for t in tables])
        allocation = allocate(R, config.n_segments, cap=config.cap)
        summaries = tuple(
            fit_summary(make_cost_provider(curves, config.kind, members=indices), backtrack(t, p))
            for indices, t, p in zip(members, tables, allocation.counts)
        )
        return Fit(
            prototypes=np.vstack([s.on_grid() for s in summaries]),
            summaries=summaries,
            allocation=allocation.counts,
        )

    return fit_partition


def _kmeans_fitter(curves: CurveSet, n_clusters: int) -> Callable[[np.ndarray], Fit]:
    def fit_partition(assignment: np.ndarray) -> Fit:
        members = cluster_members(assignment, n_clusters)
        return Fit(prototypes=np.vstack([curves.values[m].mean(axis=0) for m in members]))

    return fit_partition


def _fitter(curves: CurveSet, config: ClusteringConfig) -> Callable[[np.ndarray], Fit]:
    if config.mode is ClusteringMode.UNIFORM:
        return _uniform_fitter(curves, config)
    if config.mode is ClusteringMode.OPTIMAL:
        return _optimal_fitter(curves, config)
    raise ConfigurationError("plain K-means produces no summaries; use kmeans()")


def _initial_partition(
    curves: CurveSet, config: ClusteringConfig, initial: Optional[Sequence[int]]
) -> np.ndarray:
    if initial is not None:
        assignment = np.asarray(initial, dtype=np.int64)
        if assignment.shape != (curves.n_curves,):
            raise ConfigurationError("the initial partition must give one cluster per curve")
        if assignment.min() < 0 or assignment.max() >= config.n_clusters:
            raise ConfigurationError(f"initial cluster labels must lie in 0..{config.n_clusters - 1}")
        return assignment
    if config.init is InitMethod.GIVEN:
        raise ConfigurationError("init=given needs an initial partition")
    return random_partition(curves.n_curves, config.n_clusters, config.seed)


def _state(
    curves: CurveSet,
    assignment: np.ndarray,
    fit: Fit,
    trace: list[float],
    converged: bool,
    aggregator: SegmentAggregator,
) -> ClusterState:
    return ClusterState(
        assignment=assignment,
        allocation=fit.allocation,
        summaries=fit.summaries,
        error=trace[-1],
        iterations=len(trace),
        trace=tuple(trace),
        converged=converged,
        aggregator=aggregator,
    )


def _run(curves: CurveSet, config: ClusteringConfig, initial: Optional[Sequence[int]]) -> ClusterState:
    config.check_against(curves.n_curves, curves.n_points)
    start = _initial_partition(curves, config, initial)
    assignment, fit, trace, converged = _alternate(
        curves,
        start,
        config.n_clusters,
        _fitter(curves, config),
        l1=config.kind.is_l1,
        max_iter=config.max_iter,
        aggregator=config.aggregator,
        label=f"{config.mode.value} K={config.n_clusters} P={config.n_segments} seed={config.seed}",
    )
    return _state(curves, assignment, fit, trace, converged, config.aggregator)


def cluster_uniform(
    curves: CurveSet, config: ClusteringConfig, initial: Optional[Sequence[int]] = None
) -> ClusterState:
    """Every cluster summarized with P/K segments."""
    if config.mode is not ClusteringMode.UNIFORM:
        raise ConfigurationError(f"cluster_uniform needs mode=uniform, got {config.mode.value}")
    return _run(curves, config, initial)


def cluster_optimal(
    curves: CurveSet, config: ClusteringConfig, initial: Optional[Sequence[int]] = None
) -> ClusterState:
    """
    Cluster with segment counts chosen by the allocation DP at every iteration.

    Args:
        curves: Curves sharing one grid
        config: K, P, segment model and loop limits; mode must be optimal
        initial: Starting partition, otherwise a seeded random one

    Returns:
        ClusterState of the last fit, with its E trace and allocation

    Raises:
        ConfigurationError: If the config is not in optimal mode
    """
    if config.mode is not ClusteringMode.OPTIMAL:
        raise ConfigurationError(f"cluster_optimal needs mode=optimal, got {config.mode.value}")
    return _run(curves, config, initial)


def cluster(
    curves: CurveSet, config: ClusteringConfig, initial: Optional[Sequence[int]] = None
) -> ClusterState:
    return _run(curves, config, initial)


def kmeans(
    curves: CurveSet,
    n_clusters: int,
    seed: int = 0,
    max_iter: int = 100,
    initial: Optional[Sequence[int]] = None,
) -> KMeansResult:
    """Lloyd iterations with unconstrained prototypes (cluster means)."""
    if not 1 <= n_clusters <= curves.n_curves:
        raise ConfigurationError(f"K={n_clusters} must lie in 1..N={curves.n_curves}")
    start = (
        random_partition(curves.n_curves, n_clusters, seed)
        if initial is None
        else np.asarray(initial, dtype=np.int64)
    )
    assignment, fit, trace, converged = _alternate(
        curves,
        start,
        n_clusters,
        _kmeans_fitter(curves, n_clusters),
        l1=False,
        max_iter=max_iter,
        label=f"kmeans K={n_clusters} seed={seed}",
    )
    return KMeansResult(
        assignment=assignment,
        centroids=fit.prototypes,
        inertia=trace[-1],
        iterations=len(trace),
        trace=tuple(trace),
        converged=converged,
    )


def summarize_partition(
    curves: CurveSet, assignment: Sequence[int], config: ClusteringConfig
) -> ClusterState:
    """Optimal summaries of a fixed partition, without reassigning curves."""
    config.check_against(curves.n_curves, curves.n_points)
    assignment = np.asarray(assignment, dtype=np.int64)
    fit = _fitter(curves, config)(assignment)
    error = _partition_error(curves.values, assignment, fit, config.kind.is_l1, config.aggregator)
    return _state(curves, assignment, fit, [error], False, config.aggregator)


def two_phase(curves: CurveSet, config: ClusteringConfig) -> TwoPhaseResult:
    """K-means to convergence, then the constrained loop started from its partition."""
    result = kmeans(curves, config.n_clusters, seed=config.seed, max_iter=config.max_iter)
    summarized = summarize_partition(curves, result.assignment, config)
    state = _run(curves, config, result.assignment)
    logger.info(
        f"Two-phase: K-means E={result.inertia:.6g} ({result.iterations} iterations), "
        f"summarized E={summarized.error:.6g}, final E={state.error:.6g}"
    )
    return TwoPhaseResult(kmeans=result, summarized_error=summarized.error, state=state)


def multi_restart(
    curves: CurveSet,
    config: ClusteringConfig,
    seeds: Sequence[int],
    protocol: Callable[[CurveSet, ClusteringConfig], ClusterState] = cluster,
) -> RestartResult:
    """Independent runs, one per seed; the best has the lowest E (smallest seed on ties)."""
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    states = parallel_map(lambda seed: protocol(curves, replace(config, seed=seed)), seeds)
    result = RestartResult(seeds=seeds, states=tuple(states))
    logger.info(f"✓ {len(seeds)} restarts, best E={result.best.error:.6g} (seed {result.best_seed})")
    return result


def global_error(curves: CurveSet, state: ClusterState) -> float:
    """E recomputed from the data and the state's summaries."""
    total = 0.0
    for k, summary in enumerate(state.summaries):
        total += summary_error(curves.values[state.assignment == k], summary, state.aggregator)
    return total


def relative_error(curves: CurveSet, state: ClusterState) -> float:
    """E divided by the total squared variability of the curves around their own means."""
    denominator = curves.within_curve_variability()
    if denominator == 0:
        raise DomainError("every curve is constant: the relative error is undefined")
    return global_error(curves, state) / denominator
