"""
Flat-file persistence: GRF1 binary fields, CSV tables and JSON summaries.

Floats are written with repr so that equal inputs give identical bytes.
"""

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np

from core.crossings import CrossingReport, ScaleScan
from core.errors import FileFormatError
from core.geometry import PathKind, PlanarPath
from core.grf import GridField
from core.lfpp import MetricBall, MetricGraph

PathLike = Union[str, Path]

GRF_MAGIC = b"GRF1"
GRF_HEADER = np.dtype([("magic", "S4"), ("grid_size", "<u4"), ("spacing", "<f8")])


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_field(path: PathLike, field: GridField) -> Path:
    """16-byte header (magic, u32 grid size, f64 spacing) then row-major f64 values."""
    path = Path(path)
    header = np.array([(GRF_MAGIC, field.size, field.spacing)], dtype=GRF_HEADER)
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def read_field(path: PathLike) -> GridField:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < GRF_HEADER.itemsize:
        raise FileFormatError(str(path), len(data), "truncated header")
    header = np.frombuffer(data[: GRF_HEADER.itemsize], dtype=GRF_HEADER)[0]
    if header["magic"] != GRF_MAGIC:
        raise FileFormatError(str(path), 0, f"bad magic {bytes(header['magic'])!r}")
    size = int(header["grid_size"])
    if size < 8:
        raise FileFormatError(str(path), 4, f"grid size {size} below 8")
    spacing = float(header["spacing"])
    if not spacing > 0:
        raise FileFormatError(str(path), 8, f"non-positive spacing {spacing}")
    expected = GRF_HEADER.itemsize + 8 * size * size
    if len(data) != expected:
        raise FileFormatError(str(path), min(len(data), expected), f"expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data[GRF_HEADER.itemsize :], dtype="<f8").reshape(size, size)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
        raise FileFormatError(str(path), GRF_HEADER.itemsize + 8 * bad, "non-finite value")
    return GridField(values.astype(float), spacing, normalization_note=f"loaded from {path.name}")


def write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(value) for value in row])
    path.write_text(buffer.getvalue(), encoding="utf-8")
    return path


def read_rows(path: PathLike, header: Sequence[str]) -> np.ndarray:
    """Numeric CSV table with an exact header line; shape (rows, columns)."""
    path = Path(path)
    raw = path.read_bytes()
    offset = 0
    rows = []
    for number, line in enumerate(raw.splitlines(keepends=True)):
        text = line.decode("utf-8", errors="replace").strip()
        if number == 0:
            if text.split(",") != list(header):
                raise FileFormatError(str(path), 0, f"expected header {','.join(header)!r}, found {text!r}")
        elif text:
            cells = text.split(",")
            if len(cells) != len(header):
                raise FileFormatError(str(path), offset, f"expected {len(header)} columns, found {len(cells)}")
            try:
                rows.append([float(cell) for cell in cells])
            except ValueError as e:
                raise FileFormatError(str(path), offset, f"unparsable number: {e}") from e
        offset += len(line)
    if not raw:
        raise FileFormatError(str(path), 0, "empty file")
    return np.asarray(rows, dtype=float).reshape(-1, len(header))


def write_field_csv(path: PathLike, field: GridField) -> Path:
    header = [f"c{j}" for j in range(field.size)]
    return write_rows(path, header, field.values)


PATH_COLUMNS = ("index", "x", "y", "cumulative_length")
TRACE_COLUMNS = ("index", "t", "x", "y")
FAN_COLUMNS = ("path_id", "index", "x", "y", "cumulative_length")
BALL_COLUMNS = ("x", "y", "dist_to_center")
CROSSING_COLUMNS = ("center_x", "center_y", "crossing_count")
SCALE_COLUMNS = ("k", "radius", "L1", "L2", "S1", "S2")
DEPTH_COLUMNS = ("depth", "cube_count", "sum_diam_sq")
MODULUS_COLUMNS = ("delta", "modulus")
DIMENSION_COLUMNS = ("scale", "count")


def write_path(path: PathLike, planar_path: PlanarPath) -> Path:
    """Geodesics as (index, x, y, cumulative_length); traces as (index, t, x, y)."""
    vertices = planar_path.vertices
    if planar_path.kind is PathKind.SLE_TRACE and planar_path.times is not None:
        rows = ((i, t, x, y) for i, (t, (x, y)) in enumerate(zip(planar_path.times, vertices)))
        return write_rows(path, TRACE_COLUMNS, rows)
    rows = ((i, x, y, s) for i, ((x, y), s) in enumerate(zip(vertices, planar_path.cumulative_length)))
    return write_rows(path, PATH_COLUMNS, rows)


def read_path(path: PathLike) -> PlanarPath:
    first = Path(path).read_text(encoding="utf-8").split("\n", 1)[0].strip()
    if first.split(",") == list(TRACE_COLUMNS):
        table = read_rows(path, TRACE_COLUMNS)
        return PlanarPath.from_points(table[:, 2:4], kind=PathKind.SLE_TRACE, times=table[:, 1])
    table = read_rows(path, PATH_COLUMNS)
    return PlanarPath(table[:, 1:3], table[:, 3], PathKind.GEODESIC)


def write_fan(path: PathLike, fan: Sequence[PlanarPath]) -> Path:
    rows = (
        (path_id, i, x, y, s)
        for path_id, geodesic in enumerate(fan)
        for i, ((x, y), s) in enumerate(zip(geodesic.vertices, geodesic.cumulative_length))
    )
    return write_rows(path, FAN_COLUMNS, rows)


def read_fan(path: PathLike) -> List[np.ndarray]:
    table = read_rows(path, FAN_COLUMNS)
    ids = table[:, 0].astype(int)
    return [table[ids == k, 2:4] for k in np.unique(ids)]


def write_ball(path: PathLike, graph: MetricGraph, ball: MetricBall) -> Path:
    positions = graph.positions(ball.members)
    rows = ((x, y, d) for (x, y), d in zip(positions, ball.member_distances))
    return write_rows(path, BALL_COLUMNS, rows)


def write_crossing_report(path: PathLike, report: CrossingReport) -> Path:
    rows = ((x, y, count) for (x, y), count in report.per_center)
    return write_rows(path, CROSSING_COLUMNS, rows)


def write_scale_scan(path: PathLike, scan: ScaleScan) -> Path:
    rows = ((r.k, r.radius, r.L1, r.L2, r.S1, r.S2) for r in scan.per_scale)
    return write_rows(path, SCALE_COLUMNS, rows)


def crossing_summary(report: CrossingReport) -> Dict:
    low, high = report.exceed_interval
    return {
        "epsilon": report.epsilon,
        "alpha": report.alpha,
        "r_in": report.r_in,
        "path_kind": report.path_kind.value,
        "centers": len(report.per_center),
        "max_count": report.max_count,
        "argmax_center": list(report.argmax_center) if report.argmax_center else None,
        "samples": report.samples,
        "threshold": report.threshold,
        "exceed_frequency": report.exceed_frequency,
        "exceed_interval": [low, high],
        "sample_max_counts": list(report.sample_max_counts),
    }


def scale_summary(scan: ScaleScan) -> Dict:
    return {
        "center": list(scan.center),
        "base_radius": scan.base_radius,
        "K": scan.K,
        "c": scan.c,
        "N_K_c": scan.good_count,
        "S1_less_S2": scan.shortcut_count,
        "ratios_L1_L2": [row.L1 / row.L2 for row in scan.per_scale],
    }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return value.as_posix()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_json(path: PathLike, payload: Dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(str(path), 0, "file does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(str(path), len(text[: e.pos].encode("utf-8")), e.msg) from e


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


