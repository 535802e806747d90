"""Starting partitions: Ward hierarchical clustering and a batch self-organizing map."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage

from config.settings import settings
from models.curves import CurveSet
from models.errors import ConfigurationError, DomainError
from services.executor import parallel_map

logger = logging.getLogger(__name__)

FINAL_RADIUS = 0.5


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Ward merge tree over N curves.

    ``linkage`` is scipy's (N-1) x 4 table; ``heights[s]`` is the increase of
    the total within-class variance caused by merge s.
    """

    linkage: np.ndarray
    n_leaves: int

    @property
    def merges(self) -> np.ndarray:
        return self.linkage[:, :2].astype(np.int64)

    @property
    def heights(self) -> np.ndarray:
        return self.linkage[:, 2] ** 2 / 2.0

    @property
    def sizes(self) -> np.ndarray:
        return self.linkage[:, 3].astype(np.int64)

    def within_variance(self, n_clusters: int) -> float:
        """Total within-class variance of the cut into ``n_clusters`` clusters."""
        _check_cut(n_clusters, self.n_leaves)
        return float(self.heights[: self.n_leaves - n_clusters].sum())

    def variance_decreases(self, last: int = 20) -> list[tuple[int, float]]:
        """(k, decrease) pairs: variance removed going from k - 1 to k clusters, k = 2.."""
        count = min(last, self.n_leaves - 1)
        heights = self.heights
        return [(k, float(heights[self.n_leaves - k])) for k in range(2, count + 2)]


def _check_cut(n_clusters: int, n_leaves: int) -> None:
    if not 1 <= n_clusters <= n_leaves:
        raise ConfigurationError(f"K={n_clusters} must lie in 1..N={n_leaves}")


def ward_cluster(curves: CurveSet) -> Dendrogram:
    """Ward linkage on Euclidean grid distances between curves."""
    if curves.n_curves < 2:
        raise DomainError("Ward clustering needs at least 2 curves")
    tree = linkage(curves.values, method="ward", metric="euclidean")
    dendrogram = Dendrogram(linkage=tree, n_leaves=curves.n_curves)
    logger.info(
        f"Ward tree over {curves.n_curves} curves, total variance {dendrogram.heights.sum():.6g}"
    )
    return dendrogram


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Renumber labels 0.. in order of first appearance."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    mapping = np.empty(first.size, dtype=np.int64)
    mapping[np.argsort(first)] = np.arange(first.size)
    return mapping[inverse.ravel()]


def partition_from_dendrogram(dendrogram: Dendrogram, n_clusters: int) -> np.ndarray:
    _check_cut(n_clusters, dendrogram.n_leaves)
    labels = cut_tree(dendrogram.linkage, n_clusters=n_clusters).ravel()
    return _relabel(labels)


@dataclass(frozen=True, eq=False)
class SomGrid:
    """Trained rows x cols map; unit u sits at (u // cols, u % cols)."""

    rows: int
    cols: int
    prototypes: np.ndarray
    assignment: np.ndarray
    radii: tuple[float, ...]
    quantization: tuple[float, ...]

    @property
    def n_units(self) -> int:
        return self.rows * self.cols

    @property
    def positions(self) -> np.ndarray:
        return _positions(self.rows, self.cols)

    def unit_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_units)

    def __repr__(self) -> str:
        return f"<SomGrid({self.rows}x{self.cols}, epochs={len(self.radii)})>"


def _positions(rows: int, cols: int) -> np.ndarray:
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([r, c]).astype(np.float64)


def _squared_distances(values: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    deviation = values[:, None, :] - prototypes[None, :, :]
    return (deviation * deviation).sum(axis=2)


def _neighbourhood(positions: np.ndarray, radius: float) -> np.ndarray:
    """Gaussian kernel between units; the identity at radius 0."""
    if radius <= 0:
        return np.eye(positions.shape[0])
    gap = positions[:, None, :] - positions[None, :, :]
    return np.exp(-(gap * gap).sum(axis=2) / (2.0 * radius * radius))


def radius_schedule(initial: float, epochs: int) -> tuple[float, ...]:
    """Linear decay from ``initial`` to 0.5 (or to ``initial`` if it is smaller)."""
    if epochs < 1:
        raise ConfigurationError("the SOM needs at least one epoch")
    if initial < 0:
        raise ConfigurationError("the SOM radius must be non-negative")
    final = min(FINAL_RADIUS, initial)
    return tuple(float(r) for r in np.linspace(initial, final, epochs))


def default_radius(rows: int, cols: int) -> float:
    return max(rows, cols) / 2.0


def batch_som(
    curves: CurveSet,
    rows: int,
    cols: int,
    radius: Optional[float] = None,
    epochs: Optional[int] = None,
    seed: int = 0,
    initial_prototypes: Optional[np.ndarray] = None,
    schedule: Optional[Sequence[float]] = None,
) -> SomGrid:
    """
    Batch SOM with a Gaussian neighbourhood on a rectangular grid.

    Each epoch assigns every curve to its best matching unit (smallest unit
    index on ties) and replaces each prototype by the neighbourhood-weighted
    mean of the curves. At radius 0 the update is the plain mean of the
    unit's curves, and units without curves keep their prototype.

    Args:
        curves: Curves to organize
        rows: Map rows
        cols: Map columns
        radius: Initial radius, max(rows, cols) / 2 by default
        epochs: Number of epochs, CURVESEG_SOM_EPOCHS by default
        seed: Seed for picking the initial prototypes among the curves
        initial_prototypes: Explicit (rows * cols) x M starting prototypes
        schedule: Explicit radius per epoch, overriding radius and epochs

    Returns:
        SomGrid with the trained prototypes and the final assignment
    """
    n_units = rows * cols
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"invalid SOM grid {rows}x{cols}")
    if n_units > curves.n_curves:
        raise ConfigurationError(f"a {rows}x{cols} map needs at least {n_units} curves, got {curves.n_curves}")

    if schedule is None:
        radius = default_radius(rows, cols) if radius is None else radius
        schedule = radius_schedule(radius, settings.som_epochs if epochs is None else epochs)
    radii = tuple(float(r) for r in schedule)
    if not radii:
        raise ConfigurationError("empty SOM radius schedule")

    values = curves.values
    if initial_prototypes is None:
        chosen = np.random.default_rng(seed).choice(curves.n_curves, size=n_units, replace=False)
        prototypes = values[np.sort(chosen)].copy()
    else:
        prototypes = np.array(initial_prototypes, dtype=np.float64, copy=True)
        if prototypes.shape != (n_units, curves.n_points):
            raise ConfigurationError(f"initial prototypes must have shape ({n_units}, {curves.n_points})")

    positions = _positions(rows, cols)
    quantization = []
    for epoch, r in enumerate(radii, start=1):
        distances = _squared_distances(values, prototypes)
        bmu = np.argmin(distances, axis=1)
        quantization.append(float(distances[np.arange(values.shape[0]), bmu].sum()))
        if r <= 0:
            for unit in np.unique(bmu):
                prototypes[unit] = values[bmu == unit].mean(axis=0)
        else:
            weights = _neighbourhood(positions, r)[:, bmu]
            mass = weights.sum(axis=1)
            filled = mass > 0
            prototypes[filled] = (weights[filled] @ values) / mass[filled, None]
        logger.debug(f"SOM epoch {epoch}: radius {r:.4g}, quantization {quantization[-1]:.6g}")

    if not np.all(np.isfinite(prototypes)):
        raise DomainError("SOM prototypes diverged")
    assignment = np.argmin(_squared_distances(values, prototypes), axis=1)
    som = SomGrid(rows, cols, prototypes, assignment, radii, tuple(quantization))
    logger.info(
        f"SOM {rows}x{cols}: {len(radii)} epochs, radius {radii[0]:.3g} -> {radii[-1]:.3g}, "
        f"{int(np.count_nonzero(som.unit_sizes()))} non-empty units"
    )
    return som


def topology_statistic(
    prototypes: np.ndarray, positions: np.ndarray, values: np.ndarray
) -> float:
    """Mean grid distance between each curve's best and second-best units."""
    if prototypes.shape[0] < 2:
        raise DomainError("the topology statistic needs at least 2 units")
    order = np.argsort(_squared_distances(values, prototypes), axis=1, kind="stable")[:, :2]
    gap = positions[order[:, 0]] - positions[order[:, 1]]
    return float(np.sqrt((gap * gap).sum(axis=1)).mean())


@dataclass(frozen=True, eq=False)
class PermutationTest:
    observed: float
    permuted: np.ndarray

    @property
    def p_value(self) -> float:
        """One-sided: share of permutations at least as well organized."""
        return float((1 + np.count_nonzero(self.permuted <= self.observed)) / (1 + self.permuted.size))


def topology_permutation_test(
    som: SomGrid, curves: CurveSet, n_permutations: int = 100, seed: int = 0
) -> PermutationTest:
    """Compare the trained map against random placements of its prototypes."""
    positions = som.positions
    observed = topology_statistic(som.prototypes, positions, curves.values)
    rng = np.random.default_rng(seed)
    permuted = np.array(
        [
            topology_statistic(som.prototypes, positions[rng.permutation(som.n_units)], curves.values)
            for _ in range(n_permutations)
        ]
    )
    test = PermutationTest(observed=observed, permuted=permuted)
    logger.info(
        f"Topology statistic {observed:.4g} vs permuted mean {permuted.mean():.4g} (p={test.p_value:.3g})"
    )
    return test


@dataclass(frozen=True, eq=False)
class RadiusSweep:
    radii: tuple[float, ...]
    statistics: tuple[float, ...]
    maps: tuple[SomGrid, ...]

    @property
    def best_index(self) -> int:
        return min(range(len(self.radii)), key=lambda i: (self.statistics[i], self.radii[i]))

    @property
    def best(self) -> SomGrid:
        return self.maps[self.best_index]

    @property
    def best_radius(self) -> float:
        return self.radii[self.best_index]


def som_radius_sweep(
    curves: CurveSet,
    rows: int,
    cols: int,
    radii: Sequence[float],
    epochs: Optional[int] = None,
    seed: int = 0,
) -> RadiusSweep:
    """Train one map per initial radius; the best has the smallest topology statistic."""
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise ConfigurationError("at least one SOM radius is required")
    maps = parallel_map(lambda r: batch_som(curves, rows, cols, radius=r, epochs=epochs, seed=seed), radii)
    if rows * cols < 2:
        statistics = (0.0,) * len(maps)
    else:
        statistics = tuple(topology_statistic(m.prototypes, m.positions, curves.values) for m in maps)
    sweep = RadiusSweep(radii=radii, statistics=statistics, maps=tuple(maps))
    for r, s in zip(radii, statistics):
        logger.info(f"SOM radius {r:g}: topology statistic {s:.4g}")
    logger.info(f"✓ Selected SOM radius {sweep.best_radius:g}")
    return sweep


def partition_from_som(som: SomGrid) -> tuple[np.ndarray, np.ndarray]:
    """Clusters from the non-empty units, numbered in unit order.

    Returns the assignment and, for each cluster, the unit it came from.
    """
    units = np.flatnonzero(som.unit_sizes())
    if units.size < som.n_units:
        dropped = sorted(set(range(som.n_units)) - set(units.tolist()))
        logger.warning(f"SOM units {dropped} are empty; K reduced to {units.size}")
    lookup = np.full(som.n_units, -1, dtype=np.int64)
    lookup[units] = np.arange(units.size)
    return lookup[som.assignment], units
