"""Command handlers: one function per CLI subcommand."""
import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from config.settings import settings
from handlers.figures import cluster_panel, error_figure, segmentation_figure, ward_figure
from models.curves import CurveSet
from models.errors import ConfigurationError, DomainError
from models.records import (
    ClusterRecord,
    ClusterReport,
    RunComparison,
    RunManifest,
    SegmentationReport,
    SummaryRecord,
)
from models.state import ClusterState, ClusteringConfig, ClusteringMode, InitMethod
from models.summary import CurveAggregation, SegmentAggregator, SegmentModel, SegmentModelKind
from repositories.curve_repository import read_curves
from repositories.result_repository import ResultRepository, fingerprint, load_manifest
from services.clustering import (
    KMeansResult,
    TwoPhaseResult,
    cluster,
    kmeans,
    multi_restart,
    relative_error,
    two_phase,
)
from services.executor import parallel_map
from services.initializers import (
    SomGrid,
    batch_som,
    default_radius,
    partition_from_dendrogram,
    partition_from_som,
    som_radius_sweep,
    topology_permutation_test,
    ward_cluster,
)
from services.segmentation import summarize_set, summary_error

logger = logging.getLogger(__name__)


def _load(args: argparse.Namespace) -> CurveSet:
    return read_curves(args.input, args.header_row, args.id_column, args.transpose)


def _kind(args: argparse.Namespace) -> SegmentModelKind:
    return SegmentModelKind(SegmentModel(args.model), CurveAggregation(args.curves))


def _config_echo(args: argparse.Namespace) -> dict[str, Any]:
    echo = {}
    for key, value in sorted(vars(args).items()):
        if callable(value):
            continue
        echo[key] = list(value) if isinstance(value, tuple) else value
    return echo


def _seeds(args: argparse.Namespace) -> tuple[int, ...]:
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be at least 1")
    return tuple(range(args.seed, args.seed + args.seeds))


def _relative_error(curves: CurveSet, state: ClusterState) -> Optional[float]:
    try:
        return relative_error(curves, state)
    except DomainError as e:
        logger.warning(f"Relative error not reported: {e}")
        return None


def _assignment_rows(curves: CurveSet, assignment: np.ndarray) -> list[tuple[str, int]]:
    return [(curve_id, int(k)) for curve_id, k in zip(curves.ids, assignment)]


# ============================================================================
# segment / summarize-set
# ============================================================================

def _write_set_summary(
    args: argparse.Namespace, curves: CurveSet, members: list[int], prefix: str, source: str
) -> list[Path]:
    kind = _kind(args)
    aggregator = SegmentAggregator(args.aggregate)
    result = summarize_set(curves, kind, args.P, members=members, aggregator=aggregator)
    errors = result.tables.optimal_costs().tolist()

    repository = ResultRepository(args.output_dir)
    report = SegmentationReport(
        source=source,
        members=[curves.ids[i] for i in members],
        model=kind.model,
        aggregation=kind.aggregation,
        aggregator=aggregator,
        max_segments=args.P,
        errors=errors,
        summaries=[SummaryRecord.from_summary(s) for s in result.summaries],
    )
    repository.save_json(f"{prefix}.json", report)
    repository.save_csv(f"{prefix}_errors.csv", ["p", "error"], [(p, e) for p, e in enumerate(errors, start=1)])
    repository.save_figure(f"{prefix}_errors.svg", error_figure(errors))

    for p in args.plot_p or [args.P]:
        if not 1 <= p <= args.P:
            raise ConfigurationError(f"--plot-p value {p} outside 1..{args.P}")
        figure = segmentation_figure(curves, members, [result.summaries[p - 1]])
        repository.save_figure(f"{prefix}_p{p}.svg", figure)
    return repository.written


def cmd_segment(args: argparse.Namespace) -> list[Path]:
    """Optimal summaries of one curve for p = 1..P."""
    curves = _load(args)
    if not 0 <= args.curve < curves.n_curves:
        raise ConfigurationError(f"--curve {args.curve} outside 0..{curves.n_curves - 1}")
    logger.info(f"Segmenting curve {curves.ids[args.curve]} with up to {args.P} segments")
    return _write_set_summary(args, curves, [args.curve], "segment", curves.ids[args.curve])


def cmd_summarize_set(args: argparse.Namespace) -> list[Path]:
    """One summary shared by every curve of the file, for p = 1..P."""
    curves = _load(args)
    logger.info(f"Summarizing {curves.n_curves} curves with up to {args.P} segments")
    return _write_set_summary(args, curves, list(range(curves.n_curves)), "summary", str(args.input))


# ============================================================================
# cluster
# ============================================================================

def _som(args: argparse.Namespace, curves: CurveSet) -> SomGrid:
    rows, cols = args.som_grid
    radii = args.som_radius or [default_radius(rows, cols)]
    if len(radii) == 1:
        return batch_som(curves, rows, cols, radius=radii[0], epochs=args.som_epochs, seed=args.seed)
    sweep = som_radius_sweep(curves, rows, cols, radii, epochs=args.som_epochs, seed=args.seed)
    return sweep.best


def _clustering_config(args: argparse.Namespace, n_clusters: int, init: InitMethod) -> ClusteringConfig:
    if args.P is None:
        raise ConfigurationError("--P is required for uniform and optimal clustering")
    return ClusteringConfig(
        n_clusters=n_clusters,
        n_segments=args.P,
        kind=_kind(args),
        mode=ClusteringMode(args.mode),
        cap=args.cap,
        max_iter=args.max_iter,
        seed=args.seed,
        init=init,
        aggregator=SegmentAggregator(args.aggregate),
    )


def cmd_cluster(args: argparse.Namespace) -> list[Path]:
    """Joint clustering and summarization, with restarts and the chosen initialization."""
    if args.mode == ClusteringMode.KMEANS.value:
        return cmd_kmeans(args)

    curves = _load(args)
    started = time.perf_counter()
    layout, cells, seeds = None, None, _seeds(args)
    phases: dict[int, TwoPhaseResult] = {}

    if args.init in ("ward", "som"):
        if args.init == "ward":
            if args.K is None:
                raise ConfigurationError("--K is required with --init ward")
            initial = partition_from_dendrogram(ward_cluster(curves), args.K)
            n_clusters = args.K
        else:
            som = _som(args, curves)
            initial, cells = partition_from_som(som)
            layout = (som.rows, som.cols)
            n_clusters = int(cells.size)
            if args.K is not None and args.K != som.n_units:
                raise ConfigurationError(f"--K {args.K} does not match the {som.rows}x{som.cols} map")
        config = _clustering_config(args, n_clusters, InitMethod.GIVEN)
        seeds = (args.seed,)
        states = (cluster(curves, config, initial),)
        best = states[0]
    else:
        if args.K is None:
            raise ConfigurationError("--K is required")
        config = _clustering_config(args, args.K, InitMethod.RANDOM)

        def protocol(data: CurveSet, run: ClusteringConfig) -> ClusterState:
            if args.init == "kmeans":
                phases[run.seed] = two_phase(data, run)
                return phases[run.seed].state
            return cluster(data, run)

        restarts = multi_restart(curves, config, seeds, protocol=protocol)
        states, best = restarts.states, restarts.best
        seeds, best_seed = restarts.seeds, restarts.best_seed
        config = replace(config, seed=best_seed)

    elapsed = time.perf_counter() - started
    phase = phases.get(config.seed)
    manifest = RunManifest(
        command="cluster",
        config=_config_echo(args),
        dataset=fingerprint(args.input, curves),
        mode=config.mode.value,
        model=str(config.kind),
        n_clusters=config.n_clusters,
        n_segments=config.n_segments,
        seed=config.seed,
        seeds=list(seeds),
        seed_errors=[s.error for s in states],
        trace=list(best.trace),
        final_error=best.error,
        relative_error=_relative_error(curves, best),
        allocation=list(best.allocation),
        iterations=best.iterations,
        converged=best.converged,
        kmeans_error=phase.kmeans.inertia if phase else None,
        summarized_error=phase.summarized_error if phase else None,
        wall_time=elapsed,
    )

    repository = ResultRepository(args.output_dir)
    repository.save_json("manifest.json", manifest)
    repository.save_csv("assignment.csv", ["id", "cluster"], _assignment_rows(curves, best.assignment))
    records = [
        ClusterRecord(
            cluster=k,
            size=size,
            members=[curves.ids[i] for i in best.members(k)],
            n_segments=best.allocation[k],
            error=summary_error(curves.values[best.members(k)], best.summaries[k], best.aggregator),
            summary=SummaryRecord.from_summary(best.summaries[k]),
            unit=int(cells[k]) if cells is not None else None,
        )
        for k, size in enumerate(best.cluster_sizes())
    ]
    repository.save_json("clusters.json", ClusterReport(clusters=records))
    prototypes = np.vstack([s.on_grid() for s in best.summaries])
    labels = [f"P={p}" for p in best.allocation]
    repository.save_figure(
        "clusters.svg", cluster_panel(curves, best.assignment, prototypes, layout, cells, labels)
    )
    logger.info(f"✓ Clustering done: E={best.error:.6g}, allocation {list(best.allocation)}")
    return repository.written


# ============================================================================
# kmeans / ward / som
# ============================================================================

def cmd_kmeans(args: argparse.Namespace) -> list[Path]:
    """Plain K-means on the sampled vectors, best of the seeded restarts."""
    if args.K is None:
        raise ConfigurationError("--K is required")
    curves = _load(args)
    seeds = _seeds(args)
    started = time.perf_counter()
    results: list[KMeansResult] = parallel_map(
        lambda seed: kmeans(curves, args.K, seed=seed, max_iter=args.max_iter), seeds
    )
    best_index = min(range(len(seeds)), key=lambda i: (results[i].inertia, seeds[i]))
    best = results[best_index]
    elapsed = time.perf_counter() - started

    denominator = curves.within_curve_variability()
    manifest = RunManifest(
        command="kmeans",
        config=_config_echo(args),
        dataset=fingerprint(args.input, curves),
        mode=ClusteringMode.KMEANS.value,
        n_clusters=args.K,
        seed=seeds[best_index],
        seeds=list(seeds),
        seed_errors=[r.inertia for r in results],
        trace=list(best.trace),
        final_error=best.inertia,
        relative_error=best.inertia / denominator if denominator > 0 else None,
        iterations=best.iterations,
        converged=best.converged,
        kmeans_error=best.inertia,
        wall_time=elapsed,
    )

    repository = ResultRepository(args.output_dir)
    repository.save_json("manifest.json", manifest)
    repository.save_csv("assignment.csv", ["id", "cluster"], _assignment_rows(curves, best.assignment))
    records = []
    for k in range(args.K):
        members = np.flatnonzero(best.assignment == k)
        records.append(
            ClusterRecord(
                cluster=k,
                size=int(members.size),
                members=[curves.ids[i] for i in members],
                error=float(np.sum((curves.values[members] - best.centroids[k]) ** 2)),
                centroid=best.centroids[k].tolist(),
            )
        )
    repository.save_json("clusters.json", ClusterReport(clusters=records))
    repository.save_figure("clusters.svg", cluster_panel(curves, best.assignment, best.centroids))
    logger.info(f"✓ K-means done: E={best.inertia:.6g} after {best.iterations} iterations")
    return repository.written


def cmd_ward(args: argparse.Namespace) -> list[Path]:
    """Ward tree, merge table, variance decreases and (with --K) the cut."""
    curves = _load(args)
    tree = ward_cluster(curves)
    repository = ResultRepository(args.output_dir)
    repository.save_csv(
        "ward_merges.csv",
        ["step", "left", "right", "height", "size"],
        [
            (step, int(a), int(b), float(h), int(n))
            for step, ((a, b), h, n) in enumerate(zip(tree.merges, tree.heights, tree.sizes))
        ],
    )
    repository.save_csv("ward_variance.csv", ["clusters", "decrease"], tree.variance_decreases(20))
    repository.save_figure("ward.svg", ward_figure(tree))
    if args.K is not None:
        assignment = partition_from_dendrogram(tree, args.K)
        repository.save_csv("assignment.csv", ["id", "cluster"], _assignment_rows(curves, assignment))
    return repository.written


def cmd_som(args: argparse.Namespace) -> list[Path]:
    """Batch SOM (with an optional radius sweep) and its topology check."""
    curves = _load(args)
    rows, cols = args.som_grid
    radii = args.som_radius or [default_radius(rows, cols)]
    sweep = som_radius_sweep(curves, rows, cols, radii, epochs=args.som_epochs, seed=args.seed)
    som = sweep.best

    repository = ResultRepository(args.output_dir)
    repository.save_csv("som_sweep.csv", ["radius", "topology"], zip(sweep.radii, sweep.statistics))
    repository.save_csv(
        "som_assignment.csv",
        ["id", "unit", "row", "col"],
        [(i, int(u), int(u) // cols, int(u) % cols) for i, u in zip(curves.ids, som.assignment)],
    )
    if som.n_units >= 2:
        test = topology_permutation_test(som, curves, seed=args.seed)
        repository.save_csv(
            "som_topology.csv",
            ["observed", "permuted_mean", "p_value"],
            [(test.observed, float(test.permuted.mean()), test.p_value)],
        )
    repository.save_figure(
        "som.svg",
        cluster_panel(
            curves,
            som.assignment,
            som.prototypes,
            layout=(rows, cols),
            labels=[str(n) for n in som.unit_sizes()],
        ),
    )
    return repository.written


# ============================================================================
# report
# ============================================================================

def _report_text(rows: list[RunComparison]) -> str:
    header = ["manifest", "mode", "model", "K", "P", "E", "relative", "iterations", "time", "allocation"]
    lines = [
        [
            r.manifest,
            r.mode,
            r.model or "-",
            str(r.n_clusters),
            "-" if r.n_segments is None else str(r.n_segments),
            f"{r.final_error:.6g}",
            "-" if r.relative_error is None else f"{r.relative_error:.3f}",
            str(r.iterations),
            f"{r.wall_time:.2f}s",
            " ".join(str(p) for p in r.allocation) or "-",
        ]
        for r in rows
    ]
    widths = [max(len(h), *(len(line[i]) for line in lines)) for i, h in enumerate(header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    out += ["  ".join(v.ljust(w) for v, w in zip(line, widths)) for line in lines]
    return "\n".join(out) + "\n"


def cmd_report(args: argparse.Namespace) -> list[Path]:
    """Comparison table across run manifests."""
    manifests = [(str(path), load_manifest(path)) for path in args.manifests]
    digests = {m.dataset.sha256 for _, m in manifests}
    if len(digests) > 1:
        logger.warning(f"Manifests come from {len(digests)} different datasets")

    rows = [
        RunComparison(
            manifest=path,
            mode=m.mode,
            model=m.model,
            n_clusters=m.n_clusters,
            n_segments=m.n_segments,
            final_error=m.final_error,
            relative_error=m.relative_error,
            allocation=m.allocation,
            iterations=m.iterations,
            wall_time=m.wall_time,
            dataset=m.dataset.sha256,
        )
        for path, m in manifests
    ]
    repository = ResultRepository(args.output_dir or settings.output_dir)
    repository.save_csv(
        "report.csv",
        ["manifest", "mode", "model", "K", "P", "E", "relative_error", "iterations", "wall_time", "allocation", "dataset"],
        [
            (
                r.manifest,
                r.mode,
                r.model or "",
                r.n_clusters,
                "" if r.n_segments is None else r.n_segments,
                r.final_error,
                "" if r.relative_error is None else r.relative_error,
                r.iterations,
                r.wall_time,
                " ".join(str(p) for p in r.allocation),
                r.dataset,
            )
            for r in rows
        ],
    )
    text = _report_text(rows)
    repository.save_text("report.txt", text)
    print(text, end="")
    return repository.written
