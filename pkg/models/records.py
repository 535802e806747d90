"""JSON records written by the command-line tool (layouts documented in docs/formats.md)."""
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field

from models.curves import SampleGrid
from models.summary import (
    CurveAggregation,
    KnotSet,
    SegmentAggregator,
    SegmentModel,
    SegmentModelKind,
    Segmentation,
    Summary,
)


class DatasetFingerprint(BaseModel):
    path: str
    n_curves: int
    n_points: int
    sha256: str


class SummaryRecord(BaseModel):
    """One piecewise prototype.

    ``breaks`` (first index of each segment after the first) is set for
    segment models, ``knots`` for interpolation summaries.
    """

    model: SegmentModel
    aggregation: CurveAggregation = CurveAggregation.SUM
    n_segments: int
    breaks: Optional[list[int]] = None
    knots: Optional[list[int]] = None
    params: list[Any]
    grid: list[float]

    @classmethod
    def from_summary(cls, summary: Summary) -> "SummaryRecord":
        partition = summary.segmentation
        return cls(
            model=summary.kind.model,
            aggregation=summary.kind.aggregation,
            n_segments=summary.n_segments,
            breaks=list(partition.breaks) if isinstance(partition, Segmentation) else None,
            knots=list(partition.knots) if isinstance(partition, KnotSet) else None,
            params=summary.params.tolist(),
            grid=summary.grid.points.tolist(),
        )

    def to_summary(self) -> Summary:
        grid = SampleGrid(np.asarray(self.grid))
        if self.knots is not None:
            partition = KnotSet(tuple(self.knots), grid.size)
        else:
            partition = Segmentation(tuple(self.breaks or ()), grid.size)
        return Summary(SegmentModelKind(self.model, self.aggregation), partition, np.asarray(self.params), grid)


class SegmentationReport(BaseModel):
    """Output of ``segment`` and ``summarize-set``: one summary per segment count."""

    source: str
    members: list[str]
    model: SegmentModel
    aggregation: CurveAggregation
    aggregator: SegmentAggregator
    max_segments: int
    errors: list[float] = Field(description="optimal error for p = 1..max_segments")
    summaries: list[SummaryRecord]


class ClusterRecord(BaseModel):
    cluster: int
    size: int
    members: list[str]
    n_segments: Optional[int] = None
    error: float
    summary: Optional[SummaryRecord] = None
    centroid: Optional[list[float]] = None
    unit: Optional[int] = None


class ClusterReport(BaseModel):
    clusters: list[ClusterRecord]


class RunManifest(BaseModel):
    """Everything needed to reproduce and compare one clustering run."""

    command: str
    config: dict[str, Any]
    dataset: DatasetFingerprint
    mode: str
    model: Optional[str] = None
    n_clusters: int
    n_segments: Optional[int] = None
    seed: int
    seeds: list[int] = Field(default_factory=list)
    seed_errors: list[float] = Field(default_factory=list)
    trace: list[float]
    final_error: float
    relative_error: Optional[float] = None
    allocation: list[int] = Field(default_factory=list)
    iterations: int
    converged: bool
    kmeans_error: Optional[float] = None
    summarized_error: Optional[float] = None
    wall_time: float


class RunComparison(BaseModel):
    """One row of the ``report`` table."""

    manifest: str
    mode: str
    model: Optional[str]
    n_clusters: int
    n_segments: Optional[int]
    final_error: float
    relative_error: Optional[float]
    allocation: list[int]
    iterations: int
    wall_time: float
    dataset: str
