"""Command-line entry point for curve segmentation and clustering."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from config.logging_config import setup_logging
from config.settings import settings
from handlers.commands import (
    cmd_cluster,
    cmd_kmeans,
    cmd_report,
    cmd_segment,
    cmd_som,
    cmd_summarize_set,
    cmd_ward,
)
from models.errors import CurveSegError
from models.state import ClusteringMode
from models.summary import SegmentAggregator, SegmentModel

logger = logging.getLogger(__name__)

INIT_CHOICES = ("random", "ward", "som", "kmeans")


def som_grid(text: str) -> tuple[int, int]:
    """Parse 'RxC' (e.g. 4x5)."""
    try:
        rows, cols = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError(f"grid dimensions must be positive, got {text!r}")
    return rows, cols


def float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _input_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="CSV file of curves")
    parser.add_argument("--header-row", action="store_true", help="first row holds the sampling points")
    parser.add_argument("--id-column", action="store_true", help="first column holds curve ids")
    parser.add_argument("--transpose", action="store_true", help="curves are stored as columns")


def _model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model", choices=[m.value for m in SegmentModel], default=SegmentModel.CONSTANT_L2.value
    )
    parser.add_argument(
        "--aggregate",
        choices=[a.value for a in SegmentAggregator],
        default="sum",
        help="combine segment errors by sum or max",
    )
    parser.add_argument("--curves", choices=["sum", "max"], default="sum", help="combine member curves by sum or max")


def _som_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--som-grid", type=som_grid, default=(4, 5), help="map shape RxC (default 4x5)")
    parser.add_argument("--som-radius", type=float_list, default=None, help="initial radius, or a list to sweep")
    parser.add_argument("--som-epochs", type=int, default=settings.som_epochs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curveseg", description="Optimal piecewise summaries and clustering of sampled curves"
    )
    parser.add_argument("--output-dir", default=settings.output_dir)
    parser.add_argument("--log-level", default=settings.log_level)
    commands = parser.add_subparsers(dest="command", required=True)

    segment = commands.add_parser("segment", help="summarize one curve with 1..P segments")
    _input_options(segment)
    _model_options(segment)
    segment.add_argument("--P", type=int, required=True)
    segment.add_argument("--curve", type=int, default=0, help="row index of the curve")
    segment.add_argument("--plot-p", type=int_list, default=None, help="segment counts to draw")
    segment.set_defaults(func=cmd_segment)

    summarize = commands.add_parser("summarize-set", help="one summary for a whole set of curves")
    _input_options(summarize)
    _model_options(summarize)
    summarize.add_argument("--P", type=int, required=True)
    summarize.add_argument("--plot-p", type=int_list, default=None)
    summarize.set_defaults(func=cmd_summarize_set)

    cluster = commands.add_parser("cluster", help="joint clustering and summarization")
    _input_options(cluster)
    _model_options(cluster)
    _som_options(cluster)
    cluster.add_argument("--K", type=int, default=None)
    cluster.add_argument("--P", type=int, default=None)
    cluster.add_argument(
        "--mode", choices=[m.value for m in ClusteringMode], default=ClusteringMode.OPTIMAL.value
    )
    cluster.add_argument("--cap", type=int, default=None, help="maximum segments per cluster")
    cluster.add_argument("--init", choices=INIT_CHOICES, default="random")
    cluster.add_argument("--seeds", type=int, default=1, help="number of seeded restarts")
    cluster.add_argument("--seed", type=int, default=settings.seed)
    cluster.add_argument("--max-iter", type=int, default=settings.max_iter)
    cluster.set_defaults(func=cmd_cluster)

    kmeans = commands.add_parser("kmeans", help="plain K-means on the sampled vectors")
    _input_options(kmeans)
    kmeans.add_argument("--K", type=int, required=True)
    kmeans.add_argument("--seeds", type=int, default=1)
    kmeans.add_argument("--seed", type=int, default=settings.seed)
    kmeans.add_argument("--max-iter", type=int, default=settings.max_iter)
    kmeans.set_defaults(func=cmd_kmeans)

    ward = commands.add_parser("ward", help="Ward hierarchical clustering")
    _input_options(ward)
    ward.add_argument("--K", type=int, default=None, help="also cut the tree into K clusters")
    ward.set_defaults(func=cmd_ward)

    som = commands.add_parser("som", help="batch self-organizing map")
    _input_options(som)
    _som_options(som)
    som.add_argument("--seed", type=int, default=settings.seed)
    som.set_defaults(func=cmd_som)

    report = commands.add_parser("report", help="compare run manifests")
    report.add_argument("manifests", nargs="+")
    report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        args.func(args)
    except CurveSegError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)
