"""Download the public curve datasets and convert them to the CSV layout read by curveseg.

Usage:
    python -m scripts.fetch_datasets tecator
    python -m scripts.fetch_datasets topex --url <direct file URL>
    python -m scripts.fetch_datasets loadcurves --url <direct file URL> [--transpose]

Only the Tecator file has a stable address; the Topex and load-curve files
are linked from the pages listed in SOURCES and must be passed with --url.
"""
import argparse
import logging
import sys
from pathlib import Path

import httpx
import numpy as np

from config.logging_config import setup_logging
from models.curves import CurveSet, SampleGrid
from repositories.curve_repository import write_curves

logger = logging.getLogger(__name__)

TECATOR_URL = "http://lib.stat.cmu.edu/datasets/tecator"
TECATOR_FIELDS = 125
TECATOR_SPECTRUM = 100

SOURCES = {
    "tecator": TECATOR_URL,
    "topex": "http://www.lsp.ups-tlse.fr/staph/npfda/npfda-datasets.html",
    "loadcurves": "http://bilab.enst.fr/wakka.php?wiki=HomeLoadCurve",
}


def download(url: str) -> str:
    with httpx.Client(timeout=60.0, follow_redirects=True) as client:
        response = client.get(url)
        response.raise_for_status()
    logger.info(f"✓ Downloaded {len(response.content)} bytes from {url}")
    return response.text


def _numeric_rows(text: str) -> list[list[float]]:
    rows = []
    for line in text.splitlines():
        tokens = line.replace(",", " ").split()
        if not tokens:
            continue
        try:
            rows.append([float(token) for token in tokens])
        except ValueError:
            continue
    return rows


def parse_tecator(text: str) -> CurveSet:
    """240 samples of 125 numbers each; the first 100 are the absorbance spectrum."""
    numbers = np.array([v for row in _numeric_rows(text) if len(row) == 5 for v in row])
    if numbers.size % TECATOR_FIELDS:
        raise ValueError(f"unexpected Tecator layout: {numbers.size} values")
    values = numbers.reshape(-1, TECATOR_FIELDS)[:, :TECATOR_SPECTRUM]
    return CurveSet(SampleGrid.regular(TECATOR_SPECTRUM), values)


def parse_matrix(text: str, transpose: bool = False) -> CurveSet:
    """Whitespace or comma separated matrix, one curve per row."""
    rows = _numeric_rows(text)
    width = max(len(row) for row in rows)
    values = np.array([row for row in rows if len(row) == width])
    if transpose:
        values = values.T
    return CurveSet(SampleGrid.regular(values.shape[1]), values)


def main() -> int:
    parser = argparse.ArgumentParser(description="Fetch public curve datasets")
    parser.add_argument("dataset", choices=sorted(SOURCES))
    parser.add_argument("--url", default=None, help="direct file URL (required for topex and loadcurves)")
    parser.add_argument("--transpose", action="store_true", help="the file stores curves as columns")
    parser.add_argument("--output-dir", default="data")
    args = parser.parse_args()
    setup_logging()

    url = args.url or (TECATOR_URL if args.dataset == "tecator" else None)
    if url is None:
        logger.error(f"--url is required for {args.dataset}; the file is linked from {SOURCES[args.dataset]}")
        return 3

    try:
        text = download(url)
    except httpx.HTTPError as e:
        logger.error(f"Download failed: {e}")
        return 1

    curves = parse_tecator(text) if args.dataset == "tecator" else parse_matrix(text, args.transpose)
    path = write_curves(Path(args.output_dir) / f"{args.dataset}.csv", curves)
    logger.info(f"✓ {args.dataset}: {curves.n_curves} curves x {curves.n_points} points -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
