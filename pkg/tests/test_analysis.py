import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from core import analysis
from core.analysis import (
    WHITNEY_BAND,
    ShadowEstimate,
    WhitneyCube,
    box_count,
    box_counting_dimension,
    decay_ratios,
    holder_modulus,
    shadow_sum_by_depth,
    shadow_sum_estimate,
    whitney_decomposition,
)
from core.errors import DegenerateInputError, DivergentWalkerError, InvalidParameterError, ResolutionError
from core.geometry import PlanarPath, Rectangle, point_segment_distances


def densify(waypoints, step):
    waypoints = np.asarray(waypoints, dtype=float)
    points = [waypoints[0]]
    for start, end in zip(waypoints[:-1], waypoints[1:]):
        pieces = int(math.ceil(np.hypot(*(end - start)) / step))
        for k in range(1, pieces + 1):
            points.append(start + (end - start) * k / pieces)
    return np.array(points)


def random_walk_path(rng, steps, size):
    angles = rng.uniform(0.0, 2.0 * np.pi, steps)
    moves = size * np.column_stack([np.cos(angles), np.sin(angles)])
    return PlanarPath.from_points(np.vstack([[0.0, 0.0], np.cumsum(moves, axis=0)]))


class TestDiameter:
    def test_collinear_path_falls_back_to_all_pairs(self):
        path = PlanarPath.from_points([(0.0, 0.0), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75), (1.0, 1.0)])
        assert path.diameter == pytest.approx(np.sqrt(2.0))

    def test_matches_all_pairs_on_a_random_walk(self, rng):
        path = random_walk_path(rng, 200, 0.1)
        assert path.diameter == pytest.approx(pdist(path.vertices).max(), rel=1e-12)

    def test_unexpected_hull_errors_propagate(self, monkeypatch):
        def broken(points):
            raise ValueError("bad input")

        monkeypatch.setattr("scipy.spatial.ConvexHull", broken)
        path = PlanarPath.from_points([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
        with pytest.raises(ValueError):
            path.diameter


class TestHolderModulus:
    def test_straight_segment(self):
        path = PlanarPath.from_points([(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)])
        assert holder_modulus(path, 0.5) == pytest.approx(1.0)

    def test_l_shape(self):
        path = PlanarPath.from_points([(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)])
        assert holder_modulus(path, 0.5) == pytest.approx(2.0**0.25)

    def test_matches_exhaustive_pairs(self, rng):
        path = random_walk_path(rng, 12, 0.3)
        points = path.vertices
        delta = 0.3
        expected = 0.0
        for s in range(len(points)):
            for t in range(s + 1, len(points)):
                chord = np.hypot(*(points[t] - points[s]))
                if chord > 0:
                    expected = max(expected, pdist(points[s : t + 1]).max() / chord ** (1.0 - delta))
        assert holder_modulus(path, delta) == pytest.approx(expected, rel=1e-12)

    def test_nonincreasing_in_delta_for_short_chords(self, rng):
        path = random_walk_path(rng, 30, 0.02)
        assert path.diameter <= 1.0
        values = [holder_modulus(path, delta) for delta in (0.1, 0.3, 0.6, 0.9)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_endpoint_pair_lower_bound(self, rng):
        path = random_walk_path(rng, 40, 0.1)
        delta = 0.4
        max_chord = pdist(path.vertices).max()
        assert holder_modulus(path, delta) * max_chord ** (1.0 - delta) >= path.diameter * (1.0 - 1e-12)

    def test_needs_three_vertices(self):
        with pytest.raises(DegenerateInputError):
            holder_modulus(PlanarPath.from_points([(0.0, 0.0), (1.0, 0.0)]), 0.5)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2])
    def test_delta_range(self, delta):
        path = PlanarPath.from_points([(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)])
        with pytest.raises(InvalidParameterError):
            holder_modulus(path, delta)


def serpentine(level):
    """Boustrophedon through the centres of every cell of mesh 2^-level in the unit square."""
    n = 2**level
    h = 1.0 / n
    rows = []
    for i in range(n):
        ys = (np.arange(n) + 0.5) * h
        if i % 2:
            ys = ys[::-1]
        rows.append(np.column_stack([np.full(n, (i + 0.5) * h), ys]))
    return PlanarPath.from_points(np.vstack(rows))


class TestBoxCounting:
    def test_diagonal_step_counts_the_corner_cell(self):
        path = PlanarPath.from_points([(0.2, 0.1), (0.3, 0.3)])
        assert box_count(path, 0.25) == 3

    def test_unit_segment(self):
        path = PlanarPath.from_points(densify([(0.001, 0.3), (0.999, 0.3)], 0.01))
        counts, slope = box_counting_dimension(path, [0.25, 0.125, 0.0625])
        assert counts == [4, 8, 16]
        assert 0.9 <= slope <= 1.1

    def test_tilted_segment(self):
        path = PlanarPath.from_points(densify([(0.013, 0.021), (0.871, 0.544)], 0.001))
        counts, slope = box_counting_dimension(path, [2.0**-k for k in range(3, 9)])
        assert len(counts) == 6
        assert counts == sorted(counts)
        assert 0.9 <= slope <= 1.1

    def test_space_filling_serpentine(self):
        path = serpentine(8)
        counts, slope = box_counting_dimension(path, [2.0**-k for k in range(2, 7)])
        assert counts == [4**k for k in range(2, 7)]
        assert slope == pytest.approx(2.0)

    def test_random_walk_in_sanity_envelope(self, rng):
        path = random_walk_path(rng, 4000, 0.002)
        _, slope = box_counting_dimension(path, [2.0**-k for k in range(2, 8)])
        assert 0.9 <= slope <= 2.1

    @pytest.mark.parametrize(
        "scales",
        [[0.25], [0.125, 0.25], [0.25, 0.1], [0.25, 0.125, 0.0]],
    )
    def test_rejects_malformed_scales(self, scales):
        path = PlanarPath.from_points(densify([(0.0, 0.0), (1.0, 0.0)], 0.01))
        with pytest.raises(InvalidParameterError):
            box_counting_dimension(path, scales)

    def test_rejects_scales_below_resolution(self):
        path = PlanarPath.from_points(densify([(0.0, 0.0), (1.0, 0.0)], 0.05))
        with pytest.raises(ResolutionError):
            box_counting_dimension(path, [0.4, 0.2, 0.1, 0.05])


def _square_gap(points, corner, side):
    lo = np.asarray(corner, dtype=float)
    gap = np.maximum(np.maximum(lo - points, points - (lo + side)), 0.0)
    return np.hypot(gap[:, 0], gap[:, 1])


def _reference_distance(dense, path, corner, side):
    """Square-to-path distance: vertex-to-square and corner-to-path candidates over a dense copy."""
    corners = np.array([corner, (corner[0] + side, corner[1]), (corner[0], corner[1] + side), (corner[0] + side, corner[1] + side)])
    to_path, _ = point_segment_distances(corners, path.vertices[:-1], path.vertices[1:])
    return min(float(_square_gap(dense, corner, side).min()), float(to_path.min()))


def _reference_whitney(path, box, max_depth):
    dense = densify(path.vertices, box.width * 2.0**-max_depth / 1000.0)
    kept, shortfall = [], []

    def visit(corner, side, depth):
        gap = _reference_distance(dense, path, corner, side)
        if gap >= side:
            kept.append((corner, depth))
        elif depth == max_depth:
            shortfall.append((corner, depth))
        else:
            half = side / 2.0
            for dx, dy in ((0.0, 0.0), (half, 0.0), (0.0, half), (half, half)):
                visit((corner[0] + dx, corner[1] + dy), half, depth + 1)

    visit((box.x0, box.y0), box.width, 0)
    return kept, shortfall


BOX = Rectangle(0.0, 0.0, 1.0, 1.0)


@pytest.fixture
def bent_path():
    return PlanarPath.from_points(densify([(0.31, 0.41), (0.52, 0.63), (0.71, 0.47), (0.62, 0.29)], 0.01))


class TestWhitney:
    def test_matches_reference_quadtree(self, bent_path):
        decomposition = whitney_decomposition(bent_path, BOX, 5)
        kept, shortfall = _reference_whitney(bent_path, BOX, 5)
        assert sorted((c.corner, c.depth) for c in decomposition) == sorted(kept)
        assert sorted((c.corner, c.depth) for c in decomposition.shortfall) == sorted(shortfall)

    def test_kept_cubes_are_whitney(self, bent_path):
        decomposition = whitney_decomposition(bent_path, BOX, 6)
        dense = densify(bent_path.vertices, 1e-5)
        for cube in decomposition:
            assert cube.side == pytest.approx(2.0**-cube.depth)
            assert cube.side <= cube.distance < (2.0 + math.sqrt(2.0)) * cube.side
            assert cube.distance == pytest.approx(_reference_distance(dense, bent_path, cube.corner, cube.side), abs=1e-12)

    def test_kept_distances_stay_in_the_four_side_band(self, rng):
        path = random_walk_path(rng, 400, 0.004)
        path = PlanarPath.from_points(path.vertices + 0.5)
        decomposition = whitney_decomposition(path, BOX, 7)
        assert len(decomposition) > 0
        assert decomposition.band_fraction() == 1.0
        assert decomposition.band_fraction(8.0) == 1.0
        assert all(cube.distance <= WHITNEY_BAND * cube.side for cube in decomposition)

    def test_partition_of_the_box(self, bent_path):
        depth = 6
        decomposition = whitney_decomposition(bent_path, BOX, depth)
        cells = 2**depth
        cover = np.zeros((cells, cells), dtype=int)
        for cube in list(decomposition) + list(decomposition.shortfall):
            width = int(round(cube.side * cells))
            i = int(round(cube.corner[0] * cells))
            j = int(round(cube.corner[1] * cells))
            cover[i : i + width, j : j + width] += 1
        assert np.all(cover == 1)
        assert all(cube.depth == depth for cube in decomposition.shortfall)
        assert len(decomposition.shortfall) > 0

    def test_counts_by_depth(self, bent_path):
        decomposition = whitney_decomposition(bent_path, BOX, 5)
        rows = decomposition.counts_by_depth()
        assert sum(count for _, count in rows) == len(decomposition)
        assert [depth for depth, _ in rows] == sorted(depth for depth, _ in rows)

    def test_point_like_obstacle_rings(self):
        path = PlanarPath.from_points([(0.5003, 0.5001), (0.5004, 0.5002), (0.5005, 0.5001)])
        decomposition = whitney_decomposition(path, BOX, 6)
        kept, _ = _reference_whitney(path, BOX, 6)
        assert decomposition.counts_by_depth() == sorted(
            {depth: sum(1 for _, d in kept if d == depth) for _, depth in kept}.items()
        )
        sides = {cube.depth for cube in decomposition}
        assert min(sides) >= 2

    def test_rejects_non_square_box(self, bent_path):
        with pytest.raises(InvalidParameterError):
            whitney_decomposition(bent_path, Rectangle(0.0, 0.0, 1.0, 2.0), 3)

    def test_rejects_path_touching_box(self):
        path = PlanarPath.from_points([(0.0, 0.5), (0.5, 0.5)])
        with pytest.raises(InvalidParameterError):
            whitney_decomposition(path, BOX, 3)

    def test_rejects_negative_depth(self, bent_path):
        with pytest.raises(InvalidParameterError):
            whitney_decomposition(bent_path, BOX, -1)


@pytest.fixture
def long_segment():
    return PlanarPath.from_points(densify([(-1.0, 0.0), (1.0, 0.0)], 0.05))


NEAR_CUBE = WhitneyCube((-0.25, 0.25), 0.5, 1)


class TestShadowSum:
    def test_hits_lie_on_the_path(self, long_segment):
        estimates, total = shadow_sum_estimate(long_segment, [NEAR_CUBE], 32, seed=3)
        (estimate,) = estimates
        assert estimate.proxy
        assert estimate.hit_points.shape == (32, 2)
        assert np.all(np.abs(estimate.hit_points[:, 1]) < 1e-12)
        assert np.all(np.abs(estimate.hit_points[:, 0]) <= 1.0)
        assert estimate.diameter <= long_segment.diameter + 1e-12
        assert total == pytest.approx(estimate.diameter**2)

    def test_deterministic_given_seed(self, long_segment):
        first, total_a = shadow_sum_estimate(long_segment, [NEAR_CUBE], 16, seed=11)
        second, total_b = shadow_sum_estimate(long_segment, [NEAR_CUBE], 16, seed=11)
        np.testing.assert_array_equal(first[0].hit_points, second[0].hit_points)
        assert total_a == total_b

    def test_more_walkers_never_shrink_the_diameter(self, long_segment):
        cubes = [NEAR_CUBE, WhitneyCube((0.25, -0.75), 0.5, 1)]
        few, _ = shadow_sum_estimate(long_segment, cubes, 16, seed=5)
        many, _ = shadow_sum_estimate(long_segment, cubes, 32, seed=5)
        for a, b in zip(few, many):
            np.testing.assert_array_equal(a.hit_points, b.hit_points[:16])
            assert b.diameter >= a.diameter

    def test_translation_equivariance(self, long_segment):
        offset = np.array([1.0, -2.0])
        moved_path = long_segment.translated(tuple(offset))
        moved_cube = WhitneyCube(tuple(np.asarray(NEAR_CUBE.corner) + offset), NEAR_CUBE.side, NEAR_CUBE.depth)
        base, _ = shadow_sum_estimate(long_segment, [NEAR_CUBE], 16, seed=8)
        moved, _ = shadow_sum_estimate(moved_path, [moved_cube], 16, seed=8)
        assert moved[0].diameter == pytest.approx(base[0].diameter, abs=1e-12)

    def test_needs_enough_walkers(self, long_segment):
        with pytest.raises(InvalidParameterError):
            shadow_sum_estimate(long_segment, [NEAR_CUBE], 8, seed=0)

    def test_divergent_walker(self, long_segment, monkeypatch):
        monkeypatch.setattr(analysis, "WALKER_MAX_STEPS", 1)
        with pytest.raises(DivergentWalkerError) as info:
            shadow_sum_estimate(long_segment, [NEAR_CUBE], 16, seed=0)
        assert info.value.cube_id == 0

    def test_per_depth_sums_and_ratios(self):
        def estimate(depth, diameter):
            cube = WhitneyCube((0.0, 0.0), 2.0**-depth, depth)
            return ShadowEstimate(cube=cube, cube_id=0, hit_points=np.zeros((1, 2)), diameter=diameter)

        rows = shadow_sum_by_depth([estimate(2, 1.0), estimate(1, 2.0), estimate(2, 1.0), estimate(3, 0.0)])
        assert rows == [(1, 1, 4.0), (2, 2, 2.0), (3, 1, 0.0)]
        ratios = decay_ratios(rows + [(4, 1, 0.5)])
        assert ratios[:2] == [0.5, 0.0]
        assert math.isnan(ratios[2])
