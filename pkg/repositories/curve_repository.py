"""CSV ingestion and emission of curve sets."""
import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from models.curves import CurveSet, SampleGrid
from models.errors import CurveParseError, DomainError
from repositories.result_repository import atomic_write, format_float

logger = logging.getLogger(__name__)


@dataclass
class Cell:
    text: str
    row: int
    col: int


class CurveRepository:
    """Reads comma-separated tables of curves.

    Rows are curves and columns grid points, unless ``transpose`` is set.
    Blank lines and lines starting with '#' are skipped. The optional
    header row holds the abscissae (else t_k = k, k = 1..M) and the optional
    id column the curve names. Diagnostics use 1-based file rows and columns.
    """

    def __init__(self, header_row: bool = False, id_column: bool = False, transpose: bool = False):
        self.header_row = header_row
        self.id_column = id_column
        self.transpose = transpose

    def read(self, path: Union[str, Path]) -> CurveSet:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise CurveParseError(f"{path}: cannot read file ({e.strerror})") from e

        table = self._cells(path, text)
        if self.transpose:
            table = [list(column) for column in zip(*table)]

        header = None
        if self.header_row:
            if len(table) < 2:
                raise CurveParseError(f"{path}: a header row needs at least one curve below it")
            header, table = table[0], table[1:]

        ids = ()
        if self.id_column:
            ids = tuple(row[0].text.strip() for row in table)
            table = [row[1:] for row in table]
            header = header[1:] if header is not None else None

        if not table or len(table[0]) < 2:
            raise CurveParseError(f"{path}: curves need at least 2 sampled values")

        values = np.array([[self._number(path, cell) for cell in row] for row in table])
        if header is None:
            grid = SampleGrid.regular(values.shape[1])
        else:
            try:
                grid = SampleGrid(np.array([self._number(path, cell) for cell in header]))
            except DomainError as e:
                raise CurveParseError(f"{path}: header row: {e}") from e

        curves = CurveSet(grid, values, ids)
        logger.info(f"Loaded {curves.n_curves} curves x {curves.n_points} points from {path}")
        return curves

    @staticmethod
    def _cells(path: Path, text: str) -> list[list[Cell]]:
        table: list[list[Cell]] = []
        for row_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = next(csv.reader([line]))
            if table and len(fields) != len(table[0]):
                raise CurveParseError(
                    f"{path}:{row_number}: ragged row with {len(fields)} fields, expected {len(table[0])}"
                )
            table.append([Cell(field, row_number, col) for col, field in enumerate(fields, start=1)])
        if not table:
            raise CurveParseError(f"{path}: no data rows")
        return table

    @staticmethod
    def _number(path: Path, cell: Cell) -> float:
        try:
            value = float(cell.text)
        except ValueError:
            raise CurveParseError(
                f"{path}:{cell.row}:{cell.col}: non-numeric value {cell.text.strip()!r}"
            ) from None
        if not math.isfinite(value):
            raise CurveParseError(f"{path}:{cell.row}:{cell.col}: non-finite value {cell.text.strip()!r}")
        return value

    @staticmethod
    def write(path: Union[str, Path], curves: CurveSet) -> Path:
        """Header row of abscissae and id column; values with 17 significant digits."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["id", *(format_float(t) for t in curves.grid.points)])
        for curve_id, row in zip(curves.ids, curves.values):
            writer.writerow([curve_id, *(format_float(v) for v in row)])
        written = atomic_write(path, buffer.getvalue())
        logger.info(f"Wrote {curves.n_curves} curves to {written}")
        return written


def read_curves(
    path: Union[str, Path], header_row: bool = False, id_column: bool = False, transpose: bool = False
) -> CurveSet:
    """
    Read a CSV file of curves.

    Args:
        path: CSV file, one curve per row
        header_row: First row holds the sampling points
        id_column: First column holds the curve ids
        transpose: The file stores curves as columns

    Returns:
        CurveSet with its grid and ids

    Raises:
        CurveParseError: If the file is unreadable or malformed (message gives path:row:col where known)
    """
    return CurveRepository(header_row, id_column, transpose).read(path)


def write_curves(path: Union[str, Path], curves: CurveSet) -> Path:
    return CurveRepository.write(path, curves)
