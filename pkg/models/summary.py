"""Segmentations and the piecewise summaries fitted on them."""
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from models.curves import SampleGrid
from models.errors import ConfigurationError, DomainError


class SegmentModel(str, Enum):
    """Parametric form used on each segment."""

    CONSTANT_L2 = "const-l2"
    CONSTANT_L1 = "const-l1"
    LINE_L2 = "line-l2"
    INTERP_L2 = "interp-l2"


class CurveAggregation(str, Enum):
    """How the errors of the member curves of a set are combined."""

    SUM = "sum"
    MAX = "max"


class SegmentAggregator(str, Enum):
    """How per-segment costs are combined by the dynamic program."""

    SUM = "sum"
    MAX = "max"


@dataclass(frozen=True)
class SegmentModelKind:
    """Segment model plus curve aggregation mode."""

    model: SegmentModel = SegmentModel.CONSTANT_L2
    aggregation: CurveAggregation = CurveAggregation.SUM

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", SegmentModel(self.model))
        object.__setattr__(self, "aggregation", CurveAggregation(self.aggregation))
        if self.model is SegmentModel.INTERP_L2 and self.aggregation is not CurveAggregation.SUM:
            raise ConfigurationError("interpolation summaries only support the sum over curves")
        if self.aggregation is CurveAggregation.MAX and self.model is not SegmentModel.CONSTANT_L2:
            raise ConfigurationError("the max over curves is only available for const-l2")

    @property
    def uses_knots(self) -> bool:
        return self.model is SegmentModel.INTERP_L2

    @property
    def is_l1(self) -> bool:
        return self.model is SegmentModel.CONSTANT_L1

    def __str__(self) -> str:
        return f"{self.model.value}/{self.aggregation.value}"


@dataclass(frozen=True)
class Segmentation:
    """Ordered partition of 0..M-1 into contiguous segments.

    ``breaks`` holds the first index of every segment after the first, so
    segment p covers ``bounds[p] .. bounds[p + 1] - 1`` with
    ``bounds = (0, *breaks, M)``.
    """

    breaks: tuple[int, ...]
    n_points: int

    def __post_init__(self) -> None:
        breaks = tuple(int(b) for b in self.breaks)
        if self.n_points < 1:
            raise DomainError("a segmentation needs at least one point")
        if any(b < 1 or b > self.n_points - 1 for b in breaks):
            raise DomainError(f"breaks {breaks} out of range 1..{self.n_points - 1}")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise DomainError(f"breaks {breaks} are not strictly increasing")
        object.__setattr__(self, "breaks", breaks)

    @classmethod
    def from_segments(cls, segments: list[tuple[int, int]]) -> "Segmentation":
        """Inverse of ``segments``: half-open (start, stop) pairs covering 0..M-1."""
        if not segments or segments[0][0] != 0:
            raise DomainError("segments must start at index 0")
        for (_, stop), (start, _) in zip(segments, segments[1:]):
            if stop != start:
                raise DomainError("segments must be contiguous")
        return cls(tuple(start for start, _ in segments[1:]), segments[-1][1])

    @property
    def n_segments(self) -> int:
        return len(self.breaks) + 1

    @property
    def bounds(self) -> tuple[int, ...]:
        return (0, *self.breaks, self.n_points)

    def segments(self) -> list[tuple[int, int]]:
        bounds = self.bounds
        return list(zip(bounds[:-1], bounds[1:]))

    def segment_of(self, index: int) -> int:
        return int(np.searchsorted(np.asarray(self.breaks), index, side="right"))


@dataclass(frozen=True)
class KnotSet:
    """Interpolation knots 0 = k_0 < k_1 < ... < k_P = M - 1."""

    knots: tuple[int, ...]
    n_points: int

    def __post_init__(self) -> None:
        knots = tuple(int(k) for k in self.knots)
        if len(knots) < 2 or knots[0] != 0 or knots[-1] != self.n_points - 1:
            raise DomainError(f"knots {knots} must start at 0 and end at {self.n_points - 1}")
        if any(k2 <= k1 for k1, k2 in zip(knots, knots[1:])):
            raise DomainError(f"knots {knots} are not strictly increasing")
        object.__setattr__(self, "knots", knots)

    @property
    def n_segments(self) -> int:
        return len(self.knots) - 1

    def segments(self) -> list[tuple[int, int]]:
        """Closed (first, last) index pairs; adjacent chords share a knot."""
        return list(zip(self.knots[:-1], self.knots[1:]))


Partition = Union[Segmentation, KnotSet]


@dataclass(frozen=True, eq=False)
class Summary:
    """A piecewise prototype on a grid.

    ``params`` is (P,) levels for constant models, (P, 2) rows of
    (slope, intercept) for lines and (P + 1,) knot values for interpolation.
    """

    kind: SegmentModelKind
    segmentation: Partition
    params: np.ndarray
    grid: SampleGrid

    def __post_init__(self) -> None:
        params = np.array(self.params, dtype=np.float64, copy=True)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

        if self.segmentation.n_points != self.grid.size:
            raise DomainError("segmentation and grid disagree on the number of points")
        if self.kind.uses_knots != isinstance(self.segmentation, KnotSet):
            raise DomainError(f"{self.kind.model.value} summaries need a matching segmentation type")

        n_segments = self.segmentation.n_segments
        expected = {
            SegmentModel.CONSTANT_L2: (n_segments,),
            SegmentModel.CONSTANT_L1: (n_segments,),
            SegmentModel.LINE_L2: (n_segments, 2),
            SegmentModel.INTERP_L2: (n_segments + 1,),
        }[self.kind.model]
        if params.shape != expected:
            raise DomainError(f"expected parameters of shape {expected}, got {params.shape}")

    @property
    def n_segments(self) -> int:
        return self.segmentation.n_segments

    def on_grid(self) -> np.ndarray:
        """Values g(t_0)..g(t_{M-1})."""
        t = self.grid.points
        if isinstance(self.segmentation, KnotSet):
            knots = np.asarray(self.segmentation.knots)
            return np.interp(t, t[knots], self.params)

        values = np.empty(self.grid.size, dtype=np.float64)
        for p, (start, stop) in enumerate(self.segmentation.segments()):
            if self.kind.model is SegmentModel.LINE_L2:
                slope, intercept = self.params[p]
                values[start:stop] = slope * t[start:stop] + intercept
            else:
                values[start:stop] = self.params[p]
        return values

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Summary):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.segmentation == other.segmentation
            and self.grid == other.grid
            and np.array_equal(self.params, other.params)
        )

    def __repr__(self) -> str:
        return f"<Summary({self.kind}, P={self.n_segments})>"


def evaluate_summary(summary: Summary, t: float) -> float:
    """Evaluate g(t) for t in [t_0, t_{M-1}].

    Between two grid points that belong to different segments the left
    segment's model is extended up to the next segment's first point.
    """
    grid = summary.grid
    if not grid.start <= t <= grid.end:
        raise DomainError(f"t={t} outside [{grid.start}, {grid.end}]")

    if isinstance(summary.segmentation, KnotSet):
        knots = np.asarray(summary.segmentation.knots)
        return float(np.interp(t, grid.points[knots], summary.params))

    index = int(np.searchsorted(grid.points, t, side="right")) - 1
    p = summary.segmentation.segment_of(index)
    if summary.kind.model is SegmentModel.LINE_L2:
        slope, intercept = summary.params[p]
        return float(slope * t + intercept)
    return float(summary.params[p])
