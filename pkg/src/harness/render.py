"""
PNG rendering of fields, metric balls, traces and crossing reports.

Figures are written with the Agg backend and without a Software metadata
entry, so identical inputs give identical bytes.
"""

from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from core.config import logger  # noqa: E402
from core.errors import FileFormatError, InvalidParameterError  # noqa: E402
from core.geometry import PlanarPath  # noqa: E402
from core.grf import GridField  # noqa: E402
from core.storage import (  # noqa: E402
    BALL_COLUMNS,
    CROSSING_COLUMNS,
    read_fan,
    read_field,
    read_path,
    read_rows,
)

DPI = 100
PNG_METADATA = {"Software": None}


class RenderStyle(str, Enum):
    FIELD = "field"
    BALL = "ball"
    TRACE = "trace"
    CROSSINGS = "crossings"


def _save(fig, output: Path) -> Path:
    output = Path(output)
    fig.savefig(output, dpi=DPI, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    logger.debug(f"Rendered {output}")
    return output


def render_field(field: GridField, output: Path) -> Path:
    box = field.extent
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(
        field.values.T,
        origin="lower",
        extent=(box.x0, box.x1, box.y0, box.y1),
        cmap="viridis",
        interpolation="nearest",
    )
    fig.colorbar(image, ax=ax, label="h")
    ax.set_aspect("equal")
    ax.set_title(f"{field.boundary_kind.value} field, N = {field.size}")
    return _save(fig, output)


def render_ball(
    positions: np.ndarray, distances: np.ndarray, output: Path, fan: Sequence[np.ndarray] = ()
) -> Path:
    """Ball members coloured by distance to the centre, with the geodesic fan on top."""
    fig, ax = plt.subplots(figsize=(6, 6))
    points = ax.scatter(positions[:, 0], positions[:, 1], c=distances, s=4, marker="s", cmap="magma", linewidths=0)
    fig.colorbar(points, ax=ax, label="distance to centre")
    for geodesic in fan:
        ax.plot(geodesic[:, 0], geodesic[:, 1], color="white", linewidth=0.4, alpha=0.8)
    ax.set_aspect("equal")
    ax.set_title(f"metric ball, {len(positions)} vertices, {len(fan)} geodesics")
    return _save(fig, output)


def render_trace(
    path: PlanarPath, output: Path, annuli: Sequence[Tuple[Tuple[float, float], float, float]] = ()
) -> Path:
    """Trace polyline with optional (centre, r_in, r_out) annulus overlays."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(path.vertices[:, 0], path.vertices[:, 1], color="black", linewidth=0.5)
    for center, r_in, r_out in annuli:
        ax.add_patch(Circle(center, r_out, fill=False, color="tab:red", linewidth=0.8))
        ax.add_patch(Circle(center, r_in, fill=False, color="tab:blue", linewidth=0.8))
    ax.set_aspect("equal")
    ax.set_title(f"{path.kind.value}, {len(path)} points")
    return _save(fig, output)


def render_crossings(table: np.ndarray, output: Path, title: str = "crossing counts") -> Path:
    """Crossing counts per centre; the argmax centre (first maximal row) is marked."""
    fig, ax = plt.subplots(figsize=(6, 5))
    points = ax.scatter(table[:, 0], table[:, 1], c=table[:, 2], s=12, marker="s", cmap="plasma", linewidths=0)
    fig.colorbar(points, ax=ax, label="crossings")
    if len(table):
        best = int(np.argmax(table[:, 2]))
        ax.plot(table[best, 0], table[best, 1], marker="x", color="cyan", markersize=10, mew=2)
        title = f"{title} (max {int(table[best, 2])})"
    ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, output)


def _fan_sibling(ball_file: Path) -> Optional[Path]:
    candidate = ball_file.with_name(ball_file.name.replace("ball", "fan", 1))
    return candidate if candidate != ball_file and candidate.exists() else None


def render(input_path: Path, style: str, output: Optional[Path] = None) -> Path:
    """Render a lab output file to PNG next to it (or at output)."""
    input_path = Path(input_path)
    try:
        style = RenderStyle(style)
    except ValueError:
        raise InvalidParameterError(f"unknown render style {style!r}") from None
    if not input_path.exists():
        raise FileFormatError(str(input_path), 0, "file does not exist")
    output = Path(output) if output else input_path.with_suffix(".png")

    if style is RenderStyle.FIELD:
        return render_field(read_field(input_path), output)
    if style is RenderStyle.BALL:
        table = read_rows(input_path, BALL_COLUMNS)
        sibling = _fan_sibling(input_path)
        fan = read_fan(sibling) if sibling else ()
        return render_ball(table[:, :2], table[:, 2], output, fan)
    if style is RenderStyle.TRACE:
        return render_trace(read_path(input_path), output)
    return render_crossings(read_rows(input_path, CROSSING_COLUMNS), output)
