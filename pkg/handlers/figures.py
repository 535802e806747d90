"""SVG figures: summaries over their curves, cluster panels and the Ward tree."""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from matplotlib.figure import Figure
from scipy.cluster.hierarchy import dendrogram as draw_dendrogram

from models.curves import CurveSet
from models.summary import Summary
from services.initializers import Dendrogram

logger = logging.getLogger(__name__)

MEMBER_STYLE = {"color": "0.7", "linewidth": 0.6}
PROTOTYPE_STYLE = {"color": "black", "linewidth": 1.4}


def segmentation_figure(curves: CurveSet, members: Sequence[int], summaries: Sequence[Summary]) -> Figure:
    """One panel per summary: the member curves in grey, the summary in black."""
    t = curves.grid.points
    figure = Figure(figsize=(6.0, 2.2 * len(summaries)))
    axes = figure.subplots(len(summaries), 1, sharex=True, squeeze=False)[:, 0]
    for ax, summary in zip(axes, summaries):
        for i in members:
            (line,) = ax.plot(t, curves.values[i], **MEMBER_STYLE)
            line.set_gid(f"member{i}")
        (line,) = ax.plot(t, summary.on_grid(), **PROTOTYPE_STYLE)
        line.set_gid(f"summary-p{summary.n_segments}")
        ax.set_ylabel(f"P={summary.n_segments}")
    axes[-1].set_xlabel("t")
    figure.tight_layout()
    return figure


def _panel_shape(n_cells: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(n_cells))
    return math.ceil(n_cells / cols), cols


def cluster_panel(
    curves: CurveSet,
    assignment: np.ndarray,
    prototypes: np.ndarray,
    layout: Optional[tuple[int, int]] = None,
    cells: Optional[Sequence[int]] = None,
    labels: Optional[Sequence[str]] = None,
) -> Figure:
    """Grid of cells, each holding a cluster's members (grey) and prototype (black).

    ``layout`` fixes the grid shape (the SOM map) and ``cells`` the position
    of each cluster in it; by default clusters fill a near-square grid.
    Every curve is tagged ``cell{k}-member{i}`` or ``cell{k}-prototype``.
    """
    n_clusters = prototypes.shape[0]
    rows, cols = layout or _panel_shape(n_clusters)
    cells = list(cells) if cells is not None else list(range(n_clusters))
    t = curves.grid.points
    low, high = float(curves.values.min()), float(curves.values.max())

    figure = Figure(figsize=(2.2 * cols, 1.8 * rows))
    axes = figure.subplots(rows, cols, sharex=True, sharey=True, squeeze=False)
    for ax in axes.flat:
        ax.set_axis_off()

    for k in range(n_clusters):
        ax = axes.flat[cells[k]]
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
        for i in np.flatnonzero(assignment == k):
            (line,) = ax.plot(t, curves.values[i], **MEMBER_STYLE)
            line.set_gid(f"cell{k}-member{i}")
        (line,) = ax.plot(t, prototypes[k], **PROTOTYPE_STYLE)
        line.set_gid(f"cell{k}-prototype")
        ax.set_ylim(low, high)
        if labels is not None:
            ax.set_title(labels[k], fontsize=7)

    figure.tight_layout()
    return figure


def ward_figure(tree: Dendrogram, last: int = 20) -> Figure:
    """Dendrogram next to the within-class variance removed by each extra cluster."""
    figure = Figure(figsize=(10.0, 4.0))
    left, right = figure.subplots(1, 2)
    draw_dendrogram(tree.linkage, ax=left, no_labels=True, color_threshold=0, above_threshold_color="black")
    left.set_ylabel("Ward distance")

    decreases = tree.variance_decreases(last)
    ks = [k for k, _ in decreases]
    right.bar(ks, [d for _, d in decreases], color="0.4")
    right.set_xlabel("clusters")
    right.set_ylabel("variance decrease")
    figure.tight_layout()
    return figure


def error_figure(errors: Sequence[float], label: str = "error") -> Figure:
    """Optimal error against the number of segments."""
    figure = Figure(figsize=(5.0, 3.0))
    ax = figure.subplots()
    ax.plot(np.arange(1, len(errors) + 1), errors, marker="o", color="black")
    ax.set_xlabel("segments")
    ax.set_ylabel(label)
    figure.tight_layout()
    return figure
