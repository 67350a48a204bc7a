"""
Regularity statistics of planar paths: Hoelder modulus, box counting,
Whitney decompositions of the path complement and a harmonic-measure
estimate of the shadow sum over Whitney cubes.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from scipy.stats import linregress

from core.config import WALKER_MAX_STEPS, logger
from core.errors import (
    DegenerateInputError,
    DivergentWalkerError,
    InvalidParameterError,
    ResolutionError,
)
from core.geometry import PlanarPath, Point, Rectangle, paired_point_segment_distances

FIT_SCALES = 4
MIN_WALKERS = 16
HIT_TOLERANCE = 1e-4
WHITNEY_BAND = 4.0


def holder_modulus(path: PlanarPath, delta: float) -> float:
    """max over vertex pairs s < t of diam(path[s..t]) / |path[t] - path[s]|^(1 - delta).

    Anchors are processed from the end: spread[v] holds the largest distance
    from vertex v back to any vertex in [s, v], so the running maximum of
    spread over [s, t] is the diameter of the subpath.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    if len(path) < 3:
        raise DegenerateInputError(f"holder modulus needs >= 3 vertices, got {len(path)}")

    points = path.vertices
    n = len(points)
    spread = np.zeros(n)
    best = 0.0
    for s in range(n - 2, -1, -1):
        chords = np.hypot(points[s + 1 :, 0] - points[s, 0], points[s + 1 :, 1] - points[s, 1])
        spread[s + 1 :] = np.maximum(spread[s + 1 :], chords)
        diameters = np.maximum.accumulate(spread[s + 1 :])
        valid = chords > 0
        if valid.any():
            best = max(best, float(np.max(diameters[valid] / chords[valid] ** (1.0 - delta))))
    return best


def _check_scales(path: PlanarPath, scale_list: Sequence[float]) -> np.ndarray:
    scales = np.asarray(scale_list, dtype=float)
    if scales.ndim != 1 or len(scales) < 2:
        raise InvalidParameterError("need at least two scales")
    if np.any(scales <= 0) or np.any(np.diff(scales) >= 0):
        raise InvalidParameterError("scales must be positive and strictly decreasing")
    if not np.allclose(scales[:-1] / scales[1:], 2.0, rtol=1e-12, atol=0.0):
        raise InvalidParameterError("consecutive scales must differ by a factor of 2")
    if not scales[-1] > 2.0 * path.max_step:
        raise ResolutionError(
            f"smallest scale {scales[-1]:.3g} must exceed twice the path step ({2.0 * path.max_step:.3g})"
        )
    return scales


def box_count(path: PlanarPath, scale: float) -> int:
    """Number of half-open cells of mesh scale that meet the path.

    Assumes every segment is shorter than the mesh, so a segment meets at
    most one cell besides those of its endpoints.
    """
    starts = path.vertices[:-1]
    ends = path.vertices[1:]
    start_cells = np.floor(starts / scale).astype(np.int64)
    end_cells = np.floor(ends / scale).astype(np.int64)

    diagonal = np.all(start_cells != end_cells, axis=1)
    extra = np.empty((0, 2), dtype=np.int64)
    if diagonal.any():
        a = starts[diagonal]
        b = ends[diagonal]
        sc = start_cells[diagonal]
        ec = end_cells[diagonal]
        d = b - a
        # parameter at which the segment crosses the shared x and y grid lines
        t_x = (np.maximum(sc[:, 0], ec[:, 0]) * scale - a[:, 0]) / d[:, 0]
        t_y = (np.maximum(sc[:, 1], ec[:, 1]) * scale - a[:, 1]) / d[:, 1]
        x_first = t_x < t_y
        y_first = t_y < t_x
        extra = np.concatenate([
            np.column_stack([ec[x_first, 0], sc[x_first, 1]]),
            np.column_stack([sc[y_first, 0], ec[y_first, 1]]),
        ])

    cells = np.concatenate([start_cells, end_cells[-1:], extra])
    return int(len(np.unique(cells, axis=0)))


def box_counting_dimension(path: PlanarPath, scale_list: Sequence[float]) -> Tuple[List[int], float]:
    """Cell counts per scale and the least-squares slope of log N against log(1/scale).

    The fit uses the finest FIT_SCALES scales.
    """
    scales = _check_scales(path, scale_list)
    counts = [box_count(path, float(scale)) for scale in scales]
    fit = slice(-min(FIT_SCALES, len(scales)), None)
    slope = linregress(np.log(1.0 / scales[fit]), np.log(np.asarray(counts, dtype=float)[fit])).slope
    return counts, float(slope)


@dataclass(frozen=True)
class WhitneyCube:
    corner: Point
    side: float
    depth: int
    distance: float = math.nan

    @property
    def center(self) -> Point:
        return (self.corner[0] + 0.5 * self.side, self.corner[1] + 0.5 * self.side)

    @property
    def rectangle(self) -> Rectangle:
        return Rectangle(self.corner[0], self.corner[1], self.corner[0] + self.side, self.corner[1] + self.side)


@dataclass(frozen=True)
class WhitneyDecomposition:
    """Kept Whitney cubes plus the max-depth cubes still too close to the path."""

    cubes: Tuple[WhitneyCube, ...]
    shortfall: Tuple[WhitneyCube, ...]
    bounding_box: Rectangle
    max_depth: int

    def __iter__(self) -> Iterator[WhitneyCube]:
        return iter(self.cubes)

    def __len__(self) -> int:
        return len(self.cubes)

    def __getitem__(self, index) -> WhitneyCube:
        return self.cubes[index]

    def counts_by_depth(self) -> List[Tuple[int, int]]:
        counts = defaultdict(int)
        for cube in self.cubes:
            counts[cube.depth] += 1
        return sorted(counts.items())

    def band_fraction(self, upper: float = WHITNEY_BAND) -> float:
        """Fraction of kept cubes with side <= distance <= upper * side."""
        if not self.cubes:
            return 1.0
        return sum(1 for c in self.cubes if c.side <= c.distance <= upper * c.side) / len(self.cubes)


class PathDistance:
    """Exact Euclidean distance from query points to a polyline.

    Candidate segments come from a KD-tree on segment midpoints: the
    closest segment has its midpoint within (nearest midpoint distance +
    half the longest step) of the query.
    """

    def __init__(self, path: PlanarPath):
        self.starts = path.vertices[:-1]
        self.ends = path.vertices[1:]
        self.half_step = 0.5 * path.max_step
        self.tree = cKDTree(0.5 * (self.starts + self.ends))

    def candidates(self, points: np.ndarray, slack: float = 0.0) -> List[List[int]]:
        nearest, _ = self.tree.query(points)
        return self.tree.query_ball_point(points, nearest + self.half_step + slack)

    def __call__(self, points: np.ndarray):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        groups = self.candidates(points)
        owners = np.repeat(np.arange(len(points)), [len(g) for g in groups])
        segments = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups])
        dist, closest = paired_point_segment_distances(points[owners], self.starts[segments], self.ends[segments])

        order = np.lexsort((dist, owners))
        first = order[np.concatenate([[True], owners[order][1:] != owners[order][:-1]])]
        return dist[first], closest[first]


def _square_segment_distances(corner: Point, side: float, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance from the closed square to each segment (0 where they meet)."""
    lo = np.asarray(corner, dtype=float)
    hi = lo + side
    d = ends - starts

    # Liang-Barsky clip of each segment against the square
    enter = np.zeros(len(starts))
    leave = np.ones(len(starts))
    for axis in (0, 1):
        moving = d[:, axis] != 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo[axis] - starts[:, axis]) / d[:, axis]
            t_hi = (hi[axis] - starts[:, axis]) / d[:, axis]
        inside = (starts[:, axis] >= lo[axis]) & (starts[:, axis] <= hi[axis])
        enter = np.where(moving, np.maximum(enter, np.minimum(t_lo, t_hi)), np.where(inside, enter, np.inf))
        leave = np.where(moving, np.minimum(leave, np.maximum(t_lo, t_hi)), leave)
    meets = enter <= leave

    def point_to_square(points):
        gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
        return np.hypot(gap[:, 0], gap[:, 1])

    distances = np.minimum(point_to_square(starts), point_to_square(ends))
    for cx, cy in ((lo[0], lo[1]), (hi[0], lo[1]), (lo[0], hi[1]), (hi[0], hi[1])):
        corner_points = np.broadcast_to(np.array([cx, cy]), starts.shape)
        to_corner, _ = paired_point_segment_distances(corner_points, starts, ends)
        distances = np.minimum(distances, to_corner)
    return np.where(meets, 0.0, distances)


def cube_path_distance(cube: WhitneyCube, path_distance: PathDistance) -> float:
    center = np.asarray([cube.center])
    candidates = path_distance.candidates(center, slack=cube.side / math.sqrt(2.0))[0]
    candidates = np.asarray(candidates, dtype=np.int64)
    distances = _square_segment_distances(
        cube.corner, cube.side, path_distance.starts[candidates], path_distance.ends[candidates]
    )
    return float(distances.min())


def whitney_decomposition(path: PlanarPath, bounding_box: Rectangle, max_depth: int) -> WhitneyDecomposition:
    """Quadtree Whitney decomposition of the bounding square minus the path.

    A dyadic cube is kept when its distance to the path is at least its
    side and refined otherwise; cubes still too close at max_depth form the
    shortfall. Kept distances lie in [side, (2 + sqrt 2) * side), inside the
    band [side, WHITNEY_BAND * side].
    """
    if not bounding_box.is_square():
        raise InvalidParameterError(f"bounding box must be a square, got {bounding_box}")
    if max_depth < 0:
        raise InvalidParameterError(f"max_depth must be >= 0, got {max_depth}")
    vertices = path.vertices
    if not np.all(bounding_box.contains_strictly(vertices[:, 0], vertices[:, 1])):
        raise InvalidParameterError("path must lie in the interior of the bounding box")

    path_distance = PathDistance(path)
    kept = []
    shortfall = []
    level = [WhitneyCube((bounding_box.x0, bounding_box.y0), bounding_box.width, 0)]
    while level:
        refined = []
        for cube in level:
            gap = cube_path_distance(cube, path_distance)
            if gap >= cube.side:
                kept.append(WhitneyCube(cube.corner, cube.side, cube.depth, gap))
            elif cube.depth == max_depth:
                shortfall.append(WhitneyCube(cube.corner, cube.side, cube.depth, gap))
            else:
                half = 0.5 * cube.side
                x, y = cube.corner
                for dx, dy in ((0.0, 0.0), (half, 0.0), (0.0, half), (half, half)):
                    refined.append(WhitneyCube((x + dx, y + dy), half, cube.depth + 1))
        level = refined

    logger.debug(f"Whitney decomposition: {len(kept)} cubes, {len(shortfall)} shortfall cubes at depth {max_depth}")
    if shortfall:
        logger.warning(f"{len(shortfall)} cubes still touch the path band at max depth {max_depth}")
    return WhitneyDecomposition(tuple(kept), tuple(shortfall), bounding_box, max_depth)


@dataclass(frozen=True)
class ShadowEstimate:
    """Harmonic-measure proxy for the shadow of a Whitney cube.

    The diameter of the walkers' first-hit set on the path stands in for
    the diameter of the conformal shadow; it is an estimate, not the shadow.
    """

    cube: WhitneyCube
    cube_id: int
    hit_points: np.ndarray = field(repr=False)
    diameter: float = 0.0
    proxy: bool = True


def walker_generator(seed, cube_id: int, walker_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cube_id, walker_id)))


def _walk_on_spheres(
    start: Point, path_distance: PathDistance, generators: List[np.random.Generator], stop: float, cube_id: int
) -> np.ndarray:
    positions = np.tile(np.asarray(start, dtype=float), (len(generators), 1))
    hits = np.empty_like(positions)
    active = np.arange(len(generators))
    steps = 0
    while len(active):
        dist, closest = path_distance(positions[active])
        done = dist < stop
        hits[active[done]] = closest[done]
        active = active[~done]
        dist = dist[~done]
        if not len(active):
            break
        steps += 1
        if steps > WALKER_MAX_STEPS:
            raise DivergentWalkerError(cube_id, WALKER_MAX_STEPS)
        angles = 2.0 * np.pi * np.array([generators[w].random() for w in active])
        positions[active] += dist[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    return hits


def shadow_sum_estimate(
    path: PlanarPath, cubes: Sequence[WhitneyCube], walkers_per_cube: int, seed=None
) -> Tuple[List[ShadowEstimate], float]:
    """Walk-on-spheres estimate of the sum over cubes of diam(shadow)^2.

    Walkers start at each cube centre and stop within HIT_TOLERANCE * side
    of the path; each walker has its own stream keyed by (cube id, walker id).

    Args:
        path: Path the walkers stop on
        cubes: Whitney cubes to launch from
        walkers_per_cube: Walkers per cube, at least MIN_WALKERS
        seed: Root seed for the per-walker streams

    Returns:
        Per-cube estimates and the total of their squared diameters

    Raises:
        DivergentWalkerError: If a walker exceeds WALKER_MAX_STEPS
    """
    if walkers_per_cube < MIN_WALKERS:
        raise InvalidParameterError(f"walkers_per_cube must be >= {MIN_WALKERS}, got {walkers_per_cube}")
    if seed is None:
        seed = np.random.SeedSequence().entropy
    path_distance = PathDistance(path)

    estimates = []
    for cube_id, cube in enumerate(cubes):
        generators = [walker_generator(seed, cube_id, w) for w in range(walkers_per_cube)]
        hits = _walk_on_spheres(cube.center, path_distance, generators, HIT_TOLERANCE * cube.side, cube_id)
        diameter = float(pdist(hits).max()) if len(hits) > 1 else 0.0
        estimates.append(ShadowEstimate(cube=cube, cube_id=cube_id, hit_points=hits, diameter=diameter))

    total = float(sum(estimate.diameter**2 for estimate in estimates))
    logger.debug(f"Shadow sum over {len(estimates)} cubes: {total:.6g}")
    return estimates, total


def shadow_sum_by_depth(estimates: Sequence[ShadowEstimate]) -> List[Tuple[int, int, float]]:
    """(depth, cube count, sum of diam^2) per depth."""
    counts = defaultdict(int)
    sums = defaultdict(float)
    for estimate in estimates:
        counts[estimate.cube.depth] += 1
        sums[estimate.cube.depth] += estimate.diameter**2
    return [(depth, counts[depth], sums[depth]) for depth in sorted(counts)]


def decay_ratios(per_depth: Sequence[Tuple[int, int, float]]) -> List[float]:
    """Ratios of consecutive per-depth sums; nan where the earlier sum is 0."""
    sums = [row[2] for row in per_depth]
    return [later / earlier if earlier > 0 else math.nan for earlier, later in zip(sums, sums[1:])]
