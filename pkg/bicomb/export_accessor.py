import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from bicomb.custom_types import DictWithStringKeys
from bicomb.exceptions import ExportError
from bicomb.lp_geometry import lp_distance, p_label
from bicomb.models import PolyPath, SpacePoint

logger = logging.getLogger(__name__)

SIG_DIGITS = ".12g"


def fmt(value: float) -> str:
    return format(float(value) + 0.0, SIG_DIGITS)


def write_text_atomic(destination: str | Path, text: str) -> Path:
    """Writes through a temporary file in the same directory, then renames it into place."""
    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=destination.parent, prefix=f".{destination.name}.")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, destination)
    except OSError as e:
        logger.error(f"Failed to write {destination}: {e}")
        raise ExportError(f"cannot write {destination}: {e}") from e
    logger.info(f"Wrote {destination}")
    return destination


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def path_rows(path: PolyPath) -> list[tuple[str, list[float], float]]:
    """(chart, coords, arclength) at each segment start and at the final end."""
    if not path.segments:
        point = path.breakpoints[0]
        return [(point.chart, list(point.coords), 0.0)]
    rows = []
    travelled = 0.0
    for segment in path.segments:
        rows.append((segment.chart, list(segment.start), travelled))
        travelled += lp_distance(np.asarray(segment.start), np.asarray(segment.end), path.p)
    last = path.segments[-1]
    rows.append((last.chart, list(last.end), travelled))
    return rows


def _rows_csv(rows: Sequence[tuple[str, list[float], float]]) -> str:
    width = max(len(coords) for _, coords, _ in rows)
    header = ["chart"] + [f"x{i}" for i in range(width)] + ["arclength"]
    body = (
        [chart] + [fmt(c) for c in coords] + [""] * (width - len(coords)) + [fmt(s)]
        for chart, coords, s in rows
    )
    return _csv_text(header, body)


def path_csv(path: PolyPath) -> str:
    return _rows_csv(path_rows(path))


def path_json(path: PolyPath) -> str:
    payload = {
        "p": p_label(path.p),
        "method": path.method.value,
        "length": fmt(path.lengths.get(p_label(path.p), 0.0)),
        "rows": [
            {"chart": chart, "coords": [fmt(c) for c in coords], "arclength": fmt(s)}
            for chart, coords, s in path_rows(path)
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def export_path_csv(path: PolyPath, destination: str | Path) -> Path:
    return write_text_atomic(destination, path_csv(path))


def export_path_json(path: PolyPath, destination: str | Path) -> Path:
    return write_text_atomic(destination, path_json(path))


def ray_csv(ts: Sequence[float], points: Sequence[SpacePoint]) -> str:
    """Ray samples in the path layout; a ray's parameter is its arclength."""
    return _rows_csv([(point.chart, list(point.coords), t) for t, point in zip(ts, points)])


def export_ray_csv(ray, destination: str | Path, samples: int = 64) -> Path:
    """Samples a ray evenly over [0, reach]."""
    last = min(ray.horizon, ray.reach)
    ts = np.linspace(0.0, last, samples).tolist()
    return write_text_atomic(destination, ray_csv(ts, [ray.eval(t) for t in ts]))


def dump_json(payload: BaseModel | DictWithStringKeys | list) -> str:
    """Canonical JSON of a model or plain payload: sorted keys, two-space indent."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json", by_alias=True)
    elif isinstance(payload, list):
        payload = [
            p.model_dump(mode="json", by_alias=True) if isinstance(p, BaseModel) else p
            for p in payload
        ]
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def export_json(payload: BaseModel | DictWithStringKeys | list, destination: str | Path) -> Path:
    return write_text_atomic(destination, dump_json(payload))
