"""
Annulus crossing statistics for planar paths.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import binomtest, norm

from core.config import logger
from core.errors import InvalidParameterError, ResolutionError
from core.geometry import PathKind, PlanarPath, Point, Rectangle, point_segment_distances
from core.grf import max_feasible_scales
from core.lfpp import (
    MetricGraph,
    annulus_crossing_length,
    annulus_separating_length,
    path_from_vertices,
    shortest_path_tree,
)

CROSSING_THRESHOLD = 4

_OUTER = 1
_INNER = 2


@dataclass(frozen=True)
class Annulus:
    center: Point
    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0.0 < self.r_in < self.r_out:
            raise InvalidParameterError(f"need 0 < r_in < r_out, got ({self.r_in}, {self.r_out})")


@dataclass(frozen=True)
class CrossingReport:
    """Crossing counts over a grid of annulus centres.

    For reports aggregated over several paths, per_center holds the largest
    count any path made at that centre and sample_max_counts the per-path
    maxima.
    """

    epsilon: float
    alpha: float
    path_kind: PathKind
    per_center: Tuple[Tuple[Point, int], ...]
    max_count: int
    sample_max_counts: Tuple[int, ...] = ()
    threshold: int = CROSSING_THRESHOLD

    def __post_init__(self):
        expected = max((count for _, count in self.per_center), default=0)
        if self.max_count != expected:
            raise InvalidParameterError(f"max_count {self.max_count} disagrees with per-centre maximum {expected}")

    @property
    def r_in(self) -> float:
        return self.epsilon**self.alpha

    @property
    def argmax_center(self) -> Optional[Point]:
        if not self.per_center or self.max_count == 0:
            return None
        return next(center for center, count in self.per_center if count == self.max_count)

    @property
    def samples(self) -> int:
        return len(self.sample_max_counts)

    @property
    def exceed_count(self) -> int:
        return sum(1 for count in self.sample_max_counts if count > self.threshold)

    @property
    def exceed_frequency(self) -> float:
        return self.exceed_count / self.samples if self.samples else 0.0

    @property
    def exceed_interval(self) -> Tuple[float, float]:
        return wilson_interval(self.exceed_count, self.samples)


@dataclass(frozen=True)
class ScaleRow:
    k: int
    radius: float
    L1: float
    L2: float
    S1: float
    S2: float


@dataclass(frozen=True)
class ScaleScan:
    center: Point
    base_radius: float
    c: float
    per_scale: Tuple[ScaleRow, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for row in self.per_scale:
            if min(row.L1, row.L2, row.S1, row.S2) <= 0:
                raise InvalidParameterError(f"non-positive length at scale {row.k}")

    @property
    def K(self) -> int:
        return len(self.per_scale)

    @property
    def good_count(self) -> int:
        """N(K, c): scales with L1 <= c * L2."""
        return sum(1 for row in self.per_scale if row.L1 <= self.c * row.L2)

    @property
    def shortcut_count(self) -> int:
        """Scales with S1 < S2."""
        return sum(1 for row in self.per_scale if row.S1 < row.S2)


def _segment_events(starts: np.ndarray, ends: np.ndarray, center: Point, annulus: Annulus) -> np.ndarray:
    """Circle-touch events per segment, in order along the segment.

    Distance to the centre is convex along a segment, so the events are
    outer entry, inner entry, inner exit, outer exit. Returns an (S, 4)
    array of codes, 0 where the event does not occur on the segment.
    """
    c = np.asarray(center, dtype=float)
    d = ends - starts
    rel = starts - c
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", rel, d)
    base = np.einsum("ij,ij->i", rel, rel)

    codes = np.zeros((len(starts), 4), dtype=np.int8)
    for radius, code, columns in ((annulus.r_out, _OUTER, (0, 3)), (annulus.r_in, _INNER, (1, 2))):
        disc = b * b - 4.0 * a * (base - radius * radius)
        real = disc >= 0.0
        root = np.sqrt(np.where(real, disc, 0.0))
        first = (-b - root) / (2.0 * a)
        second = (-b + root) / (2.0 * a)
        codes[:, columns[0]] = np.where(real & (first >= 0.0) & (first <= 1.0), code, 0)
        codes[:, columns[1]] = np.where(real & (second >= 0.0) & (second <= 1.0), code, 0)
    return codes


def count_crossings(path: PlanarPath, annulus: Annulus) -> int:
    """Number of inner/outer transits of the path through the closed annulus.

    The ordered sequence of circle touches, with repeats of the same circle
    merged, alternates between outer and inner; each alternation is one
    maximal subpath joining the two circles inside the annulus. Entering and
    leaving through the same circle contributes nothing.
    """
    starts = path.vertices[:-1]
    ends = path.vertices[1:]
    lengths = path.segment_lengths
    near, _ = point_segment_distances(np.asarray([annulus.center], dtype=float), starts, ends)
    near = near[0] <= annulus.r_out
    if not near.any():
        return 0
    if np.any(lengths[near] >= annulus.r_in / 4.0):
        raise ResolutionError(
            f"path steps near {annulus.center} reach {lengths[near].max():.3g}, "
            f"need < r_in/4 = {annulus.r_in / 4.0:.3g}"
        )
    return _count_near(starts[near], ends[near], annulus)


def _count_near(starts: np.ndarray, ends: np.ndarray, annulus: Annulus) -> int:
    events = _segment_events(starts, ends, annulus.center, annulus).ravel()
    events = events[events != 0]
    if len(events) == 0:
        return 0
    merged = events[np.concatenate([[True], events[1:] != events[:-1]])]
    return len(merged) - 1


def center_grid(region: Rectangle, center_spacing: float) -> np.ndarray:
    """Centres x0 + k * spacing inside the half-open region, shape (m, 2)."""
    if not center_spacing > 0:
        raise InvalidParameterError(f"center_spacing must be positive, got {center_spacing}")
    nx = int(math.ceil(region.width / center_spacing - 1e-9))
    ny = int(math.ceil(region.height / center_spacing - 1e-9))
    xs = region.x0 + center_spacing * np.arange(nx)
    ys = region.y0 + center_spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _crossing_counts(path: PlanarPath, centers: np.ndarray, r_in: float, r_out: float) -> np.ndarray:
    if r_in <= 4.0 * path.max_step:
        raise ResolutionError(
            f"inner radius {r_in:.3g} must exceed 4 path steps ({4.0 * path.max_step:.3g})"
        )
    starts = path.vertices[:-1]
    ends = path.vertices[1:]
    midpoints = 0.5 * (starts + ends)
    # a segment within r_out of a centre has its midpoint within r_out + step/2
    neighborhoods = cKDTree(midpoints).query_ball_point(centers, r_out + 0.5 * path.max_step)
    counts = np.zeros(len(centers), dtype=int)
    for index, candidates in enumerate(neighborhoods):
        if not candidates:
            continue
        candidates = np.sort(np.asarray(candidates))
        annulus = Annulus((float(centers[index, 0]), float(centers[index, 1])), r_in, r_out)
        counts[index] = _count_near(starts[candidates], ends[candidates], annulus)
    return counts


def max_crossings_over_grid(
    path: PlanarPath, epsilon: float, alpha: float, region: Rectangle, center_spacing: float
) -> CrossingReport:
    """Crossings of B(z, epsilon) minus B(z, epsilon^alpha) for z on a grid over region.

    Args:
        path: Path to test
        epsilon: Outer radius in (0, 1)
        alpha: Inner radius exponent, above 1
        region: Rectangle holding the centre grid
        center_spacing: Step of the centre grid

    Returns:
        Single-path CrossingReport with the count at every centre
    """
    if not alpha > 1.0:
        raise InvalidParameterError(f"alpha must exceed 1, got {alpha}")
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    centers = center_grid(region, center_spacing)
    counts = _crossing_counts(path, centers, epsilon**alpha, epsilon)
    per_center = tuple(
        ((float(x), float(y)), int(count)) for (x, y), count in zip(centers, counts)
    )
    max_count = int(counts.max()) if len(counts) else 0
    return CrossingReport(
        epsilon=float(epsilon),
        alpha=float(alpha),
        path_kind=path.kind,
        per_center=per_center,
        max_count=max_count,
        sample_max_counts=(max_count,),
    )


def merge_reports(reports: Sequence[CrossingReport]) -> CrossingReport:
    """Aggregate single-path reports over the same centre grid."""
    if not reports:
        raise InvalidParameterError("cannot merge an empty list of reports")
    first = reports[0]
    centers = [center for center, _ in first.per_center]
    stacked = np.array([[count for _, count in report.per_center] for report in reports], dtype=int)
    combined = stacked.max(axis=0) if stacked.size else np.zeros(0, dtype=int)
    samples = tuple(count for report in reports for count in report.sample_max_counts)
    return CrossingReport(
        epsilon=first.epsilon,
        alpha=first.alpha,
        path_kind=first.path_kind,
        per_center=tuple((center, int(count)) for center, count in zip(centers, combined)),
        max_count=int(combined.max()) if combined.size else 0,
        sample_max_counts=samples,
        threshold=first.threshold,
    )


def central_region(graph: MetricGraph) -> Rectangle:
    """Central quarter of the lattice hull."""
    box = graph.field.extent
    cx, cy = box.center
    return Rectangle(cx - box.width / 4.0, cy - box.height / 4.0, cx + box.width / 4.0, cy + box.height / 4.0)


def sample_far_pairs(graph: MetricGraph, num_pairs: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Uniform vertex pairs at Euclidean separation >= a quarter of the grid side."""
    separation = graph.size * graph.spacing / 4.0
    pairs = []
    while len(pairs) < num_pairs:
        a, b = (int(v) for v in rng.integers(0, graph.num_vertices, size=2))
        pa, pb = graph.positions([a, b])
        if np.hypot(*(pa - pb)) >= separation:
            pairs.append((a, b))
    return pairs


def geodesic_crossing_experiment(
    graph: MetricGraph,
    num_pairs: int,
    epsilon_list: Sequence[float],
    alpha: float,
    seed=None,
    region: Optional[Rectangle] = None,
) -> List[CrossingReport]:
    """Crossing reports of geodesics between random far-apart vertex pairs, one per epsilon."""
    if num_pairs < 1:
        raise InvalidParameterError(f"num_pairs must be >= 1, got {num_pairs}")
    for epsilon in epsilon_list:
        if not epsilon**alpha > 4.0 * graph.spacing:
            raise InvalidParameterError(
                f"epsilon^alpha = {epsilon ** alpha:.3g} must exceed 4 lattice steps ({4.0 * graph.spacing:.3g})"
            )
    region = region or central_region(graph)
    rng = np.random.default_rng(seed)
    pairs = sample_far_pairs(graph, num_pairs, rng)

    per_epsilon = {epsilon: [] for epsilon in epsilon_list}
    for a, b in pairs:
        path = path_from_vertices(graph, shortest_path_tree(graph, a).vertices_to(b))
        for epsilon in epsilon_list:
            per_epsilon[epsilon].append(max_crossings_over_grid(path, epsilon, alpha, region, epsilon / 2.0))

    reports = [merge_reports(per_epsilon[epsilon]) for epsilon in epsilon_list]
    for report in reports:
        logger.info(
            f"Geodesic crossings at epsilon={report.epsilon}: max {report.max_count}, "
            f"P(max > {report.threshold}) = {report.exceed_frequency:.3f} over {report.samples} pairs"
        )
    return reports


def scale_scan(graph: MetricGraph, z: Point, base_radius: float, K: int, c: float) -> ScaleScan:
    """Separating and crossing lengths around z at the dyadic radii 2^-k * base_radius."""
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if not c > 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    limit = max_feasible_scales(base_radius, graph.spacing, min_steps=8.0)
    if K > limit:
        raise ResolutionError(f"K = {K} is below lattice resolution; max feasible K is {limit}", max_feasible=limit)

    rows = []
    for k in range(1, K + 1):
        r = base_radius * 2.0 ** (-k)
        # the S1 and S2 bands are widened to two lattice steps when thinner
        s1_inner = min(0.75 * r, 0.875 * r - 2.0 * graph.spacing)
        s2_outer = max(0.625 * r, 0.5 * r + 2.0 * graph.spacing)
        rows.append(
            ScaleRow(
                k=k,
                radius=r,
                L1=annulus_separating_length(graph, z, 0.5 * r, 0.875 * r),
                L2=annulus_crossing_length(graph, z, 0.5 * r, 0.875 * r),
                S1=annulus_separating_length(graph, z, s1_inner, 0.875 * r),
                S2=annulus_crossing_length(graph, z, 0.5 * r, s2_outer),
            )
        )
    return ScaleScan(center=(float(z[0]), float(z[1])), base_radius=float(base_radius), c=float(c), per_scale=tuple(rows))


def _kl_exponent(p: float, r: float) -> float:
    upper = 0.0 if r == 1.0 else (1.0 - r) * math.log((1.0 - p) / (1.0 - r))
    lower = 0.0 if r == 0.0 else r * math.log(p / r)
    return upper + lower


def _check_probability(name: str, value: float):
    if not 0.0 < value < 1.0:
        raise InvalidParameterError(f"{name} must lie in (0, 1), got {value}")


def binomial_tail_bound(p: float, r: float, n: int) -> float:
    """Chernoff bound on P[Bin(n, p) >= r n] for p <= r <= 1."""
    _check_probability("p", p)
    if not p <= r <= 1.0:
        raise InvalidParameterError(f"need p <= r <= 1, got p={p}, r={r}")
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    return math.exp(n * _kl_exponent(p, r))


def binomial_lower_tail_bound(p: float, r: float, n: int) -> float:
    """Chernoff bound on P[Bin(n, p) <= r n] for 0 <= r <= p."""
    _check_probability("p", p)
    if not 0.0 <= r <= p:
        raise InvalidParameterError(f"need 0 <= r <= p, got p={p}, r={r}")
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    return math.exp(n * _kl_exponent(p, r))


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise InvalidParameterError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    confidence = 2.0 * norm.cdf(z) - 1.0
    interval = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(interval.low), float(interval.high))


def experiment_size(p: float, r: float, target: float) -> int:
    """Smallest n whose binomial tail bound at (p, r) is <= target."""
    _check_probability("p", p)
    _check_probability("target", target)
    if r == p or not 0.0 <= r <= 1.0:
        raise InvalidParameterError(f"r must differ from p and lie in [0, 1], got r={r}")
    exponent = _kl_exponent(p, r)
    return max(1, int(math.ceil(math.log(target) / exponent - 1e-12)))
