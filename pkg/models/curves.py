"""Sampled curves: the shared grid and the N x M value matrix."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from models.errors import DomainError


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Ordered evaluation points t_0 < ... < t_{M-1} shared by all curves."""

    points: np.ndarray

    def __post_init__(self) -> None:
        points = _frozen(np.asarray(self.points).ravel())
        if points.size < 2:
            raise DomainError(f"a sample grid needs at least 2 points, got {points.size}")
        if not np.all(np.isfinite(points)):
            raise DomainError("sample grid points must be finite")
        if not np.all(np.diff(points) > 0):
            raise DomainError("sample grid points must be strictly increasing")
        object.__setattr__(self, "points", points)

    @classmethod
    def regular(cls, size: int) -> "SampleGrid":
        """Grid t_k = k for k = 1..size (used when a file carries no abscissae)."""
        return cls(np.arange(1, size + 1, dtype=np.float64))

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def end(self) -> float:
        return float(self.points[-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"<SampleGrid(M={self.size}, [{self.start:g}, {self.end:g}])>"


@dataclass(frozen=True, eq=False)
class CurveSet:
    """N curves sampled on one grid; row i holds s_i(t_0)..s_i(t_{M-1})."""

    grid: SampleGrid
    values: np.ndarray
    ids: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim == 1:
            values = _frozen(values.reshape(1, -1))
        if values.ndim != 2 or values.shape[0] < 1:
            raise DomainError("curve values must be a non-empty N x M matrix")
        if values.shape[1] != self.grid.size:
            raise DomainError(
                f"curves have {values.shape[1]} columns but the grid has {self.grid.size} points"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("curve values must be finite")
        ids = tuple(str(i) for i in self.ids) if self.ids else tuple(str(i) for i in range(values.shape[0]))
        if len(ids) != values.shape[0]:
            raise DomainError(f"got {len(ids)} ids for {values.shape[0]} curves")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)

    @property
    def n_curves(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.values.shape[1])

    def members(self, indices: Sequence[int]) -> np.ndarray:
        """Value rows of the given curve indices (an n x M view)."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise DomainError("a member subset must not be empty")
        return self.values[indices]

    def within_curve_variability(self, members: Optional[Sequence[int]] = None) -> float:
        """Sum over curves of the squared deviations around each curve's own mean."""
        values = self.values if members is None else self.members(members)
        centred = values - values.mean(axis=1, keepdims=True)
        return float(np.sum(centred * centred))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CurveSet):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.ids == other.ids
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"<CurveSet(N={self.n_curves}, M={self.n_points})>"
