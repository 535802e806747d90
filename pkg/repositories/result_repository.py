"""Result persistence: JSON records, CSV tables and SVG figures, written atomically."""
import csv
import hashlib
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import matplotlib
from pydantic import BaseModel, ValidationError

from config.settings import settings
from models.curves import CurveSet
from models.errors import CurveParseError
from models.records import DatasetFingerprint, RunManifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def atomic_write(path: PathLike, data: Union[str, bytes]) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, temp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(temp, path)
    except BaseException:
        Path(temp).unlink(missing_ok=True)
        raise
    return path


def format_float(value: float) -> str:
    return format(float(value), settings.float_format)


def fingerprint(path: PathLike, curves: CurveSet) -> DatasetFingerprint:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return DatasetFingerprint(
        path=str(path), n_curves=curves.n_curves, n_points=curves.n_points, sha256=digest
    )


class ResultRepository:
    """Files of one run, all under ``output_dir``."""

    def __init__(self, output_dir: Optional[PathLike] = None):
        self.output_dir = Path(output_dir or settings.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _save(self, name: str, data: Union[str, bytes]) -> Path:
        path = atomic_write(self.path(name), data)
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def save_text(self, name: str, text: str) -> Path:
        return self._save(name, text)

    def save_json(self, name: str, record: BaseModel) -> Path:
        return self._save(name, record.model_dump_json(indent=2) + "\n")

    def save_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
        return self._save(name, buffer.getvalue())

    def save_figure(self, name: str, figure) -> Path:
        buffer = io.BytesIO()
        with matplotlib.rc_context({"svg.hashsalt": "curveseg", "svg.fonttype": "none"}):
            figure.savefig(buffer, format="svg", metadata={"Date": None})
        return self._save(name, buffer.getvalue())


def load_manifest(path: PathLike) -> RunManifest:
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise CurveParseError(f"{path}: cannot read manifest ({e.strerror})") from e
    except ValidationError as e:
        raise CurveParseError(f"{path}: not a run manifest ({e.error_count()} validation errors)") from e
