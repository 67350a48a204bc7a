"""
Plane geometry value types shared by the lab modules.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

from core.errors import DegenerateInputError, InvalidParameterError

Point = Tuple[float, float]


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [x0, x1) x [y0, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidParameterError(f"empty rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> Point:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def is_square(self, rtol: float = 1e-12) -> bool:
        return abs(self.width - self.height) <= rtol * max(self.width, self.height)

    def contains(self, xs, ys) -> np.ndarray:
        """Half-open membership mask, so disjoint rectangles tile exactly."""
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        return (xs >= self.x0) & (xs < self.x1) & (ys >= self.y0) & (ys < self.y1)

    def contains_strictly(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        return (xs > self.x0) & (xs < self.x1) & (ys > self.y0) & (ys < self.y1)


class PathKind(str, Enum):
    GEODESIC = "geodesic"
    SLE_TRACE = "sle_trace"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class PlanarPath:
    """Ordered polyline with an arc-length index.

    cumulative_length is graph length for geodesics and Euclidean arc
    length for traces and synthetic paths.
    """

    vertices: np.ndarray
    cumulative_length: np.ndarray
    kind: PathKind = PathKind.SYNTHETIC
    times: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        cumulative = np.asarray(self.cumulative_length, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 2:
            raise DegenerateInputError("a path needs at least 2 planar vertices")
        if cumulative.shape != (len(vertices),):
            raise InvalidParameterError("cumulative_length must match the vertex count")
        if cumulative[0] != 0.0 or np.any(np.diff(cumulative) < 0):
            raise InvalidParameterError("cumulative_length must start at 0 and be nondecreasing")
        if np.any(np.all(np.diff(vertices, axis=0) == 0.0, axis=1)):
            raise DegenerateInputError("consecutive path vertices must be distinct")
        vertices.setflags(write=False)
        cumulative.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "cumulative_length", cumulative)
        object.__setattr__(self, "kind", PathKind(self.kind))
        if self.times is not None:
            times = np.asarray(self.times, dtype=float)
            times.setflags(write=False)
            object.__setattr__(self, "times", times)

    @classmethod
    def from_points(cls, points, kind=PathKind.SYNTHETIC, times=None) -> "PlanarPath":
        """Build a path whose index is Euclidean arc length."""
        points = np.asarray(points, dtype=float)
        steps = np.hypot(*np.diff(points, axis=0).T)
        cumulative = np.concatenate([[0.0], np.cumsum(steps)])
        return cls(points, cumulative, kind, times)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.vertices, axis=0).T)

    @property
    def max_step(self) -> float:
        """Largest Euclidean distance between consecutive vertices."""
        return float(self.segment_lengths.max())

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    @property
    def diameter(self) -> float:
        from scipy.spatial import ConvexHull, QhullError
        from scipy.spatial.distance import pdist

        points = self.vertices
        if len(points) > 3:
            try:
                points = points[ConvexHull(points).vertices]
            except QhullError:
                # flat or degenerate hull
                pass
        return float(pdist(points).max())

    def reversed(self) -> "PlanarPath":
        total = self.cumulative_length[-1]
        times = None if self.times is None else self.times[::-1].copy()
        return PlanarPath(
            self.vertices[::-1].copy(),
            (total - self.cumulative_length[::-1]).clip(min=0.0),
            self.kind,
            times,
        )

    def translated(self, offset: Point) -> "PlanarPath":
        return PlanarPath(
            self.vertices + np.asarray(offset, dtype=float),
            self.cumulative_length.copy(),
            self.kind,
            self.times,
        )


def point_segment_distances(points: np.ndarray, starts: np.ndarray, ends: np.ndarray):
    """Distances and closest points from each point to each segment.

    points has shape (P, 2), starts/ends shape (S, 2); returns arrays of
    shape (P, S) and (P, S, 2).
    """
    d = ends - starts
    dd = np.einsum("ij,ij->i", d, d)
    rel = points[:, None, :] - starts[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("psj,sj->ps", rel, d) / dd[None, :]
    t = np.where(dd[None, :] > 0, np.clip(t, 0.0, 1.0), 0.0)
    closest = starts[None, :, :] + t[..., None] * d[None, :, :]
    dist = np.hypot(*(points[:, None, :] - closest).transpose(2, 0, 1))
    return dist, closest


def paired_point_segment_distances(points: np.ndarray, starts: np.ndarray, ends: np.ndarray):
    """Distance from points[k] to segment (starts[k], ends[k]), with the closest point."""
    d = ends - starts
    dd = np.einsum("ij,ij->i", d, d)
    rel = points - starts
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("ij,ij->i", rel, d) / dd
    t = np.where(dd > 0, np.clip(t, 0.0, 1.0), 0.0)
    closest = starts + t[:, None] * d
    return np.hypot(*(points - closest).T), closest
