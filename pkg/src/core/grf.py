"""
Discrete Gaussian free fields on a square lattice.

Fields are normalized so that their covariance is 2*pi times the inverse of
the discrete Laplacian L = 4I - A (no spacing factor). With this choice the
variance of a circle average of radius r grows like log(1/r), which is the
normalization the measure formula r^{gamma^2/2} e^{gamma h_r} presumes.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import cg

from core.config import HARMONIC_RESIDUAL_TOL, HARMONIC_SOLVER_RTOL, logger
from core.errors import (
    InvalidParameterError,
    NumericalInstabilityError,
    OutOfDomainError,
)
from core.geometry import Point, Rectangle

MIN_GRID_SIZE = 8


class BoundaryKind(str, Enum):
    TORUS_WHOLE_PLANE = "torus_whole_plane"
    ZERO_BOUNDARY = "zero_boundary"
    FREE = "free"


def default_spacing(grid_size: int) -> float:
    """Spacing that makes the grid cover a square of side 4."""
    return 4.0 / grid_size


def centered_origin(grid_size: int, spacing: float) -> Point:
    offset = -0.5 * (grid_size - 1) * spacing
    return (offset, offset)


@dataclass(frozen=True, eq=False)
class GridField:
    """A real field sampled on a square lattice.

    values[i, j] sits at the plane point origin + spacing * (i, j).
    """

    values: np.ndarray
    spacing: float
    origin: Optional[Point] = None
    boundary_kind: BoundaryKind = BoundaryKind.FREE
    normalization_note: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidParameterError(f"field must be square, got shape {values.shape}")
        if values.shape[0] < MIN_GRID_SIZE:
            raise InvalidParameterError(f"grid side must be >= {MIN_GRID_SIZE}, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("field values must be finite")
        if not self.spacing > 0:
            raise InvalidParameterError(f"spacing must be positive, got {self.spacing}")
        kind = BoundaryKind(self.boundary_kind)
        if kind is BoundaryKind.ZERO_BOUNDARY:
            edge = np.concatenate([values[0], values[-1], values[:, 0], values[:, -1]])
            if np.any(edge != 0.0):
                raise InvalidParameterError("zero-boundary field has nonzero boundary entries")
        origin = self.origin
        if origin is None:
            origin = centered_origin(values.shape[0], self.spacing)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", (float(origin[0]), float(origin[1])))
        object.__setattr__(self, "boundary_kind", kind)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def center(self) -> Point:
        half = 0.5 * (self.size - 1) * self.spacing
        return (self.origin[0] + half, self.origin[1] + half)

    @property
    def extent(self) -> Rectangle:
        """Closed lattice hull, as a rectangle [min, max]."""
        top = (self.size - 1) * self.spacing
        return Rectangle(self.origin[0], self.origin[1], self.origin[0] + top, self.origin[1] + top)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        axis_x = self.origin[0] + self.spacing * np.arange(self.size)
        axis_y = self.origin[1] + self.spacing * np.arange(self.size)
        return np.meshgrid(axis_x, axis_y, indexing="ij")

    def fractional_index(self, point: Point) -> Tuple[float, float]:
        return (
            (point[0] - self.origin[0]) / self.spacing,
            (point[1] - self.origin[1]) / self.spacing,
        )

    def position(self, i: int, j: int) -> Point:
        return (self.origin[0] + i * self.spacing, self.origin[1] + j * self.spacing)

    def disk_mask(self, center: Point, radius: float) -> np.ndarray:
        """Lattice vertices strictly inside B(center, radius)."""
        xs, ys = self.coordinates()
        return (xs - center[0]) ** 2 + (ys - center[1]) ** 2 < radius * radius

    def with_values(self, values: np.ndarray, note: str = "derived") -> "GridField":
        return GridField(values, self.spacing, self.origin, BoundaryKind.FREE, note)

    def shifted(self, constant: float) -> "GridField":
        """The field plus a global constant."""
        return self.with_values(self.values + constant, f"{self.normalization_note} + {constant!r}")


@dataclass(frozen=True, eq=False)
class HarmonicDecomposition:
    """Split of a field into its harmonic extension from outside a disk and a
    zero-boundary remainder inside it."""

    harmonic_part: GridField
    remainder: GridField
    center: Point
    radius: float
    disk: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class GoodScaleReport:
    center: Point
    base_radius: float
    K: int
    M: float
    per_scale_good: Tuple[bool, ...]
    fraction_good: float

    @property
    def radii(self) -> List[float]:
        return [self.base_radius * 2.0 ** (-k) for k in range(1, self.K + 1)]


def _check_grid_size(grid_size: int):
    if int(grid_size) != grid_size or grid_size < MIN_GRID_SIZE:
        raise InvalidParameterError(f"grid_size must be an integer >= {MIN_GRID_SIZE}, got {grid_size}")


def _resolve_spacing(grid_size: int, spacing: Optional[float]) -> float:
    if spacing is None:
        return default_spacing(grid_size)
    if not spacing > 0:
        raise InvalidParameterError(f"spacing must be positive, got {spacing}")
    return float(spacing)


def sample_zero_boundary_gff(grid_size: int, spacing: Optional[float] = None, seed=None) -> GridField:
    """Sample a GFF with zero boundary values via the sine eigenbasis.

    The interior covariance is 2*pi * L^{-1} for the Dirichlet Laplacian
    on the (N-2) x (N-2) interior vertices.

    Args:
        grid_size: Lattice side N, at least MIN_GRID_SIZE
        spacing: Lattice spacing; defaults to 4 / N
        seed: Anything numpy.random.default_rng accepts

    Returns:
        GridField with a zero outer ring and ZERO boundary kind
    """
    _check_grid_size(grid_size)
    spacing = _resolve_spacing(grid_size, spacing)
    rng = np.random.default_rng(seed)

    n = grid_size - 2
    half_angles = np.pi * np.arange(1, n + 1) / (2.0 * (n + 1))
    eig_1d = 4.0 * np.sin(half_angles) ** 2
    eigenvalues = eig_1d[:, None] + eig_1d[None, :]

    coefficients = rng.standard_normal((n, n)) * np.sqrt(2.0 * np.pi / eigenvalues)
    values = np.zeros((grid_size, grid_size))
    values[1:-1, 1:-1] = scipy.fft.dstn(coefficients, type=1, norm="ortho")

    return GridField(
        values,
        spacing,
        boundary_kind=BoundaryKind.ZERO_BOUNDARY,
        normalization_note="covariance 2*pi*L^-1, zero on the lattice boundary",
    )


def _torus_spectral_weights(grid_size: int) -> np.ndarray:
    frequencies = 2.0 * np.pi * np.fft.fftfreq(grid_size)
    eigenvalues = 4.0 - 2.0 * np.cos(frequencies)[:, None] - 2.0 * np.cos(frequencies)[None, :]
    weights = np.zeros_like(eigenvalues)
    nonzero = eigenvalues > 0
    weights[nonzero] = np.sqrt(2.0 * np.pi / eigenvalues[nonzero])
    return weights


def sample_whole_plane_gff(grid_size: int, spacing: Optional[float] = None, seed=None) -> GridField:
    """Sample the torus approximation of a whole-plane GFF.

    The zero mode is dropped and the additive constant is fixed by making
    the unit-circle average around the grid centre vanish.

    Args:
        grid_size: Lattice side N, a power of two
        spacing: Lattice spacing; defaults to 4 / N
        seed: Anything numpy.random.default_rng accepts

    Returns:
        GridField normalized so that circle_average(field, centre, 1) is 0

    Raises:
        InvalidParameterError: If N is not a power of two or the unit circle
            does not fit the grid
    """
    _check_grid_size(grid_size)
    if grid_size & (grid_size - 1):
        raise InvalidParameterError(f"grid_size must be a power of two, got {grid_size}")
    spacing = _resolve_spacing(grid_size, spacing)
    rng = np.random.default_rng(seed)

    white = rng.standard_normal((grid_size, grid_size))
    weights = _torus_spectral_weights(grid_size)
    raw = np.fft.ifft2(np.fft.fft2(white) * weights).real

    field_raw = GridField(raw, spacing)
    try:
        unit_average = circle_average(field_raw, field_raw.center, 1.0)
    except (OutOfDomainError, InvalidParameterError) as e:
        raise InvalidParameterError(
            f"unit circle must fit the grid to fix the additive constant: {e}"
        ) from e

    return GridField(
        raw - unit_average,
        spacing,
        boundary_kind=BoundaryKind.TORUS_WHOLE_PLANE,
        normalization_note="torus covariance 2*pi*L^+, unit-circle average at centre = 0",
    )


def _circle_arcs(field: GridField, center: Point, radius: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lattice corners and weights of the exact circle average of the bilinear interpolant.

    The circle is cut at every crossing with a lattice line, so each arc lies in
    one cell where the interpolant is a + b u + c v + d u v and integrates in
    closed form. Returns (i, j, w) with the average equal to sum(w * values[i, j]).
    """
    ci, cj = field.fractional_index(center)
    scale = radius / field.spacing
    top = field.size - 1
    # small slack so circles that touch the hull exactly are accepted
    if ci - scale < -1e-9 or cj - scale < -1e-9 or ci + scale > top + 1e-9 or cj + scale > top + 1e-9:
        raise OutOfDomainError(f"circle B({center}, {radius}) leaves the grid")

    cuts = [np.array([0.0, 2.0 * np.pi])]
    lines = np.arange(math.ceil(ci - scale), math.floor(ci + scale) + 1)
    across = np.arccos(np.clip((lines - ci) / scale, -1.0, 1.0))
    cuts.extend([across, 2.0 * np.pi - across])
    lines = np.arange(math.ceil(cj - scale), math.floor(cj + scale) + 1)
    up = np.arcsin(np.clip((lines - cj) / scale, -1.0, 1.0))
    cuts.extend([np.mod(up, 2.0 * np.pi), np.pi - up])
    angles = np.unique(np.concatenate(cuts))
    a, b = angles[:-1], angles[1:]
    keep = b - a > 1e-15
    a, b = a[keep], b[keep]

    middle = 0.5 * (a + b)
    i0 = np.clip(np.floor(ci + scale * np.cos(middle)).astype(int), 0, top - 1)
    j0 = np.clip(np.floor(cj + scale * np.sin(middle)).astype(int), 0, top - 1)
    p = ci - i0
    q = cj - j0

    length = b - a
    cos_part = np.sin(b) - np.sin(a)
    sin_part = np.cos(a) - np.cos(b)
    product_part = 0.5 * (np.sin(b) ** 2 - np.sin(a) ** 2)
    iu = p * length + scale * cos_part
    iv = q * length + scale * sin_part
    iuv = p * q * length + scale * (p * sin_part + q * cos_part) + scale**2 * product_part

    norm = 2.0 * np.pi
    rows = np.concatenate([i0, i0 + 1, i0, i0 + 1])
    cols = np.concatenate([j0, j0, j0 + 1, j0 + 1])
    weights = np.concatenate([length - iu - iv + iuv, iu - iuv, iv - iuv, iuv]) / norm
    return rows, cols, weights


def circle_average(field: GridField, center: Point, radius: float) -> float:
    """Average of the bilinear interpolant over the circle, integrated exactly arc by arc.

    Args:
        field: Lattice field
        center: Circle centre in plane coordinates
        radius: Circle radius, at least two lattice steps

    Returns:
        The average of the field over the circle

    Raises:
        InvalidParameterError: If the radius is below two lattice steps
        OutOfDomainError: If the circle leaves the lattice hull
    """
    if radius < 2.0 * field.spacing:
        raise InvalidParameterError(
            f"radius {radius} is below two lattice steps ({2.0 * field.spacing})"
        )
    rows, cols, weights = _circle_arcs(field, center, radius)
    return float(np.dot(weights, field.values[rows, cols]))


def circle_average_weights(field: GridField, center: Point, radius: float) -> np.ndarray:
    """The circle average as an explicit linear functional on the lattice."""
    rows, cols, weights = _circle_arcs(field, center, radius)
    functional = np.zeros_like(field.values)
    np.add.at(functional, (rows, cols), weights)
    return functional


def circle_average_variance(grid_size: int, spacing: Optional[float], radius: float) -> float:
    """Exact variance of h_radius(centre) under the whole-plane sampler.

    The sampler subtracts the unit-circle average, so the functional pushed
    through the torus covariance is (a_radius - a_1).
    """
    spacing = _resolve_spacing(grid_size, spacing)
    blank = GridField(np.zeros((grid_size, grid_size)), spacing)
    functional = circle_average_weights(blank, blank.center, radius)
    functional = functional - circle_average_weights(blank, blank.center, 1.0)
    spectrum = np.fft.fft2(functional)
    weights = _torus_spectral_weights(grid_size)
    return float(np.sum(np.abs(spectrum) ** 2 * weights**2) / grid_size**2)


def dirichlet_green_matrix(grid_size: int) -> np.ndarray:
    """2*pi times the inverse Dirichlet Laplacian on interior vertices.

    Rows are ordered by (i - 1) * (N - 2) + (j - 1).
    """
    _check_grid_size(grid_size)
    n = grid_size - 2
    second_difference = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n))
    identity = sp.identity(n)
    laplacian = sp.kron(second_difference, identity) + sp.kron(identity, second_difference)
    return 2.0 * np.pi * np.linalg.inv(laplacian.toarray())


def lattice_translate(field: GridField, di: int, dj: int) -> GridField:
    """Periodic lattice translation of the field values."""
    return field.with_values(np.roll(field.values, (di, dj), axis=(0, 1)), f"translated by ({di}, {dj})")


_NEIGHBOR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def harmonic_decomposition(field: GridField, center: Point, radius: float) -> HarmonicDecomposition:
    """Discrete Markov decomposition of the field across a circle.

    The harmonic part solves the lattice Dirichlet problem on the vertices
    strictly inside B(center, radius), with the field itself as boundary
    data; the remainder carries the rest and vanishes outside the disk.
    """
    if not radius > 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    margin = radius + 2.0 * field.spacing
    box = field.extent
    if (
        center[0] - margin < box.x0
        or center[1] - margin < box.y0
        or center[0] + margin > box.x1
        or center[1] + margin > box.y1
    ):
        raise OutOfDomainError(
            f"disk B({center}, {radius}) needs a two-step margin inside the grid"
        )

    disk = field.disk_mask(center, radius)
    harmonic = field.values.copy()
    remainder = np.zeros_like(field.values)

    inside = np.argwhere(disk)
    count = len(inside)
    if count:
        index = -np.ones(field.values.shape, dtype=int)
        index[disk] = np.arange(count)

        rows = [np.arange(count)]
        cols = [np.arange(count)]
        data = [np.full(count, 4.0)]
        rhs = np.zeros(count)
        for di, dj in _NEIGHBOR_STEPS:
            ni = inside[:, 0] + di
            nj = inside[:, 1] + dj
            neighbor = index[ni, nj]
            interior = neighbor >= 0
            rows.append(np.flatnonzero(interior))
            cols.append(neighbor[interior])
            data.append(-np.ones(interior.sum()))
            rhs += np.where(interior, 0.0, field.values[ni, nj])

        laplacian = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(count, count),
        )
        solution, info = cg(laplacian, rhs, rtol=HARMONIC_SOLVER_RTOL, atol=0.0, maxiter=20 * count)
        residual = float(np.linalg.norm(rhs - laplacian @ solution))
        logger.debug(f"Dirichlet solve: {count} unknowns, cg info {info}, residual {residual:.3e}")
        if residual > HARMONIC_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(rhs))):
            raise NumericalInstabilityError(
                f"Dirichlet solve did not converge (residual {residual:.3e}, info {info})"
            )

        harmonic[disk] = solution
        remainder[disk] = field.values[disk] - solution

    return HarmonicDecomposition(
        harmonic_part=field.with_values(harmonic, "harmonic extension"),
        remainder=field.with_values(remainder, "zero-boundary remainder"),
        center=(float(center[0]), float(center[1])),
        radius=float(radius),
        disk=disk,
    )


def harmonic_oscillation(field: GridField, center: Point, radius: float) -> float:
    """sup over lattice vertices of B(center, 15r/16) of |h_harm(w) - h_harm(center)|."""
    decomposition = harmonic_decomposition(field, center, radius)
    harmonic = decomposition.harmonic_part.values
    fi, fj = field.fractional_index(center)
    at_center = map_coordinates(harmonic, [[fi], [fj]], order=1, mode="nearest")[0]
    inner = field.disk_mask(center, 15.0 * radius / 16.0)
    if not inner.any():
        return 0.0
    return float(np.max(np.abs(harmonic[inner] - at_center)))


def is_m_good(field: GridField, center: Point, radius: float, M: float) -> bool:
    """Whether B(center, radius) is M-good for the field."""
    if not M > 0:
        raise InvalidParameterError(f"M must be positive, got {M}")
    return harmonic_oscillation(field, center, radius) <= M


def max_feasible_scales(base_radius: float, spacing: float, min_steps: float = 4.0) -> int:
    """Largest K with 2^-K * base_radius >= min_steps * spacing."""
    ratio = base_radius / (min_steps * spacing)
    if ratio < 1.0:
        return 0
    return int(math.floor(math.log2(ratio) + 1e-12))


def good_scale_report(field: GridField, center: Point, base_radius: float, K: int, M: float) -> GoodScaleReport:
    """Which of the dyadic balls B(center, 2^-k r), k = 1..K, are M-good."""
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    limit = max_feasible_scales(base_radius, field.spacing)
    if K > limit:
        raise InvalidParameterError(
            f"K = {K} exceeds the lattice resolution; max feasible K is {limit}"
        )
    flags = tuple(
        is_m_good(field, center, base_radius * 2.0 ** (-k), M) for k in range(1, K + 1)
    )
    return GoodScaleReport(
        center=(float(center[0]), float(center[1])),
        base_radius=float(base_radius),
        K=K,
        M=float(M),
        per_scale_good=flags,
        fraction_good=sum(flags) / K,
    )


def lqg_measure(field: GridField, gamma: float, region: Rectangle) -> float:
    """Discrete LQG area of a rectangle at regularization scale = spacing.

    sum over vertices z in the region of s^2 * s^(gamma^2/2) * exp(gamma h_s(z)),
    with h_s the circle average of radius one lattice step.
    """
    if not 0.0 < gamma < 2.0:
        raise InvalidParameterError(f"gamma must lie in (0, 2), got {gamma}")
    xs, ys = field.coordinates()
    selected = region.contains(xs, ys)
    if not selected.any():
        return 0.0
    indices = np.argwhere(selected)
    top = field.size - 1
    if indices.min() < 1 or indices.max() > top - 1:
        raise OutOfDomainError(f"region {region} reaches the lattice boundary")

    count = math.ceil(2.0 * math.pi)
    angles = 2.0 * np.pi * np.arange(count) / count
    fi = indices[:, 0, None] + np.cos(angles)[None, :]
    fj = indices[:, 1, None] + np.sin(angles)[None, :]
    samples = map_coordinates(field.values, [fi.ravel(), fj.ravel()], order=1, mode="nearest")
    averages = samples.reshape(len(indices), count).mean(axis=1)

    s = field.spacing
    prefactor = s * s * s ** (gamma * gamma / 2.0)
    return float(prefactor * np.sum(np.exp(gamma * averages)))
