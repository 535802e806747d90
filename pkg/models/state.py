"""Clustering configuration and results."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from config.settings import settings
from models.errors import ConfigurationError
from models.summary import SegmentAggregator, SegmentModelKind, Summary


class ClusteringMode(str, Enum):
    UNIFORM = "uniform"
    OPTIMAL = "optimal"
    KMEANS = "kmeans"


class InitMethod(str, Enum):
    RANDOM = "random"
    GIVEN = "given"


@dataclass(frozen=True)
class ClusteringConfig:
    """Parameters of one clustering run (K clusters sharing a budget of P segments)."""

    n_clusters: int
    n_segments: int
    kind: SegmentModelKind = field(default_factory=SegmentModelKind)
    mode: ClusteringMode = ClusteringMode.OPTIMAL
    cap: Optional[int] = None
    max_iter: int = field(default_factory=lambda: settings.max_iter)
    seed: int = field(default_factory=lambda: settings.seed)
    init: InitMethod = InitMethod.RANDOM
    aggregator: SegmentAggregator = SegmentAggregator.SUM

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ClusteringMode(self.mode))
        object.__setattr__(self, "init", InitMethod(self.init))
        object.__setattr__(self, "aggregator", SegmentAggregator(self.aggregator))
        if self.n_clusters < 1:
            raise ConfigurationError("K must be at least 1")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if self.mode is ClusteringMode.KMEANS:
            return
        if self.n_segments < self.n_clusters:
            raise ConfigurationError(f"P={self.n_segments} must be at least K={self.n_clusters}")
        if self.mode is ClusteringMode.UNIFORM and self.n_segments % self.n_clusters:
            raise ConfigurationError(
                f"uniform mode needs K={self.n_clusters} to divide P={self.n_segments}"
            )
        if self.cap is not None:
            if self.cap < 1:
                raise ConfigurationError("the per-cluster cap must be at least 1")
            if self.cap * self.n_clusters < self.n_segments:
                raise ConfigurationError(
                    f"cap={self.cap} cannot hold P={self.n_segments} segments in K={self.n_clusters} clusters"
                )

    @property
    def segments_per_cluster(self) -> int:
        return self.n_segments // self.n_clusters

    def check_against(self, n_curves: int, n_points: int) -> None:
        """Validate the parts of the configuration that depend on the data."""
        if self.n_clusters > n_curves:
            raise ConfigurationError(f"K={self.n_clusters} exceeds the number of curves N={n_curves}")
        if self.mode is ClusteringMode.KMEANS:
            return
        max_per_cluster = n_points - 1 if self.kind.uses_knots else n_points
        limit = max_per_cluster if self.cap is None else min(self.cap, max_per_cluster)
        if self.mode is ClusteringMode.UNIFORM and self.segments_per_cluster > max_per_cluster:
            raise ConfigurationError(
                f"P/K={self.segments_per_cluster} segments do not fit on {n_points} grid points"
            )
        if limit * self.n_clusters < self.n_segments:
            raise ConfigurationError(
                f"P={self.n_segments} cannot be spread over K={self.n_clusters} clusters "
                f"with at most {limit} segments each"
            )


@dataclass(frozen=True, eq=False)
class ClusterState:
    """Outcome of an alternating clustering run."""

    assignment: np.ndarray
    allocation: tuple[int, ...]
    summaries: tuple[Summary, ...]
    error: float
    iterations: int
    trace: tuple[float, ...]
    converged: bool = True
    aggregator: SegmentAggregator = SegmentAggregator.SUM

    def __post_init__(self) -> None:
        assignment = np.array(self.assignment, dtype=np.int64, copy=True)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    @property
    def n_clusters(self) -> int:
        return len(self.summaries)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)

    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(int(n) for n in np.bincount(self.assignment, minlength=self.n_clusters))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClusterState):
            return NotImplemented
        return (
            np.array_equal(self.assignment, other.assignment)
            and self.allocation == other.allocation
            and self.summaries == other.summaries
            and self.error == other.error
            and self.iterations == other.iterations
            and self.trace == other.trace
            and self.converged == other.converged
            and self.aggregator == other.aggregator
        )

    def __repr__(self) -> str:
        return f"<ClusterState(K={self.n_clusters}, E={self.error:.6g}, iterations={self.iterations})>"
