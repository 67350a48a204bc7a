import math

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from core.errors import DegenerateInputError, InvalidParameterError, OutOfDomainError, ResolutionError
from core.grf import GridField, sample_whole_plane_gff
from core.lfpp import (
    annulus_crossing_length,
    annulus_separating_length,
    build_metric_graph,
    distance,
    geodesic,
    geodesic_fan,
    geodesic_vertices,
    internal_distance,
    is_connected,
    metric_ball,
    nearest_vertex,
    path_graph_length,
    shortest_path_tree,
    tight_predecessors,
)

XI = 0.41


@pytest.fixture
def random_graph():
    return build_metric_graph(sample_whole_plane_gff(32, seed=21), XI)


def _neighbours(n, v):
    i, j = divmod(v, n)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        if 0 <= i + di < n and 0 <= j + dj < n:
            yield (i + di) * n + j + dj


def _brute_force_distance(graph, region, a, b):
    """Minimum over all simple paths inside region, by exhaustive search."""
    region = set(region)
    best = math.inf

    def extend(v, length, visited):
        nonlocal best
        if v == b:
            best = min(best, length)
            return
        for w in _neighbours(graph.size, v):
            if w in region and w not in visited:
                visited.add(w)
                extend(w, length + graph.matrix[v, w], visited)
                visited.remove(w)

    extend(a, 0.0, {a})
    return best


def _block(n, i0, j0, rows, cols):
    return [(i0 + i) * n + j0 + j for i in range(rows) for j in range(cols)]


# graph construction


def test_flat_field_edges_weigh_one_spacing(flat_field):
    graph = build_metric_graph(flat_field, XI)
    assert np.all(graph.matrix.data == flat_field.spacing)
    assert graph.matrix.nnz == 2 * 2 * 16 * 15
    assert is_connected(graph)


def test_constant_shift_scales_every_weight(random_field):
    graph = build_metric_graph(random_field, XI)
    shifted = build_metric_graph(random_field.shifted(1.3), XI)
    assert np.allclose(shifted.matrix.data, math.exp(XI * 1.3) * graph.matrix.data, rtol=1e-12, atol=0.0)


def test_hand_set_heights_give_hand_computed_weights():
    values = np.zeros((8, 8))
    values[:3, :3] = [[0.0, 1.0, -1.0], [2.0, 0.5, 0.0], [-0.5, 1.5, 3.0]]
    graph = build_metric_graph(GridField(values, 0.5), XI)
    n = 8

    def weight(a, b):
        return 0.5 * (math.exp(XI * values[a]) + math.exp(XI * values[b])) / 2.0

    for a, b in [((0, 0), (0, 1)), ((0, 1), (0, 2)), ((0, 0), (1, 0)), ((1, 1), (2, 1)), ((2, 1), (2, 2)), ((1, 2), (2, 2))]:
        u, v = a[0] * n + a[1], b[0] * n + b[1]
        assert graph.matrix[u, v] == pytest.approx(weight(a, b), rel=1e-15)
        assert graph.matrix[v, u] == graph.matrix[u, v]


def test_build_rejects_non_positive_xi(flat_field):
    with pytest.raises(InvalidParameterError):
        build_metric_graph(flat_field, 0.0)


# distances


def test_flat_distances(flat_field):
    graph = build_metric_graph(flat_field, XI)
    assert distance(graph, 0, 1) == flat_field.spacing
    assert distance(graph, 0, 5 * 16) == 5 * flat_field.spacing
    assert distance(graph, 17, 17) == 0.0


def test_internal_distance_matches_simple_path_enumeration_on_a_4x4_block(random_graph, rng):
    n = random_graph.size
    block = _block(n, 10, 12, 4, 4)
    for _ in range(5):
        a, b = (int(v) for v in rng.choice(block, size=2, replace=False))
        expected = _brute_force_distance(random_graph, block, a, b)
        assert internal_distance(random_graph, block, a, b) == pytest.approx(expected, rel=1e-12)


def test_distance_matches_simple_path_enumeration_on_random_4x4_graphs(rng):
    # random 4x4 corner of an 8x8 field; the walled-off rest is never on a shortest path
    corner = _block(8, 0, 0, 4, 4)
    pairs = [(0, 27), (3, 24)]
    for _ in range(20):
        values = np.full((8, 8), 100.0)
        values[:4, :4] = rng.normal(scale=1.5, size=(4, 4))
        graph = build_metric_graph(GridField(values, 0.25), XI)
        for a, b in pairs + [tuple(int(v) for v in rng.choice(corner, size=2, replace=False)) for _ in range(4)]:
            expected = _brute_force_distance(graph, corner, a, b)
            assert distance(graph, a, b) == pytest.approx(expected, rel=1e-12)


def test_internal_distance_on_the_whole_graph_is_the_distance(random_graph):
    everything = np.ones(random_graph.num_vertices, dtype=bool)
    assert internal_distance(random_graph, everything, 3, 700) == pytest.approx(distance(random_graph, 3, 700), rel=1e-12)


def test_internal_distance_along_a_single_row(random_graph):
    n = random_graph.size
    row = [5 * n + j for j in range(n)]
    expected = path_graph_length(random_graph, row[3:20])
    assert internal_distance(random_graph, row, row[3], row[19]) == pytest.approx(expected, rel=1e-12)


def test_internal_distance_around_a_slit_annulus(random_graph):
    n = random_graph.size
    block = set(_block(n, 8, 8, 6, 6))
    hole = set(_block(n, 10, 10, 2, 2))
    slit = {10 * n + 8, 10 * n + 9}
    region = sorted(block - hole - slit)
    a, b = 9 * n + 8, 11 * n + 8
    value = internal_distance(random_graph, region, a, b)
    assert value == pytest.approx(_brute_force_distance(random_graph, region, a, b), rel=1e-12)
    assert value >= distance(random_graph, a, b)


def test_internal_distance_reports_unreachable_and_rejects_outsiders(random_graph):
    n = random_graph.size
    region = [0, 1, 5 * n + 5]
    assert internal_distance(random_graph, region, 0, 5 * n + 5) == math.inf
    with pytest.raises(InvalidParameterError):
        internal_distance(random_graph, region, 0, 2)


def test_internal_distance_only_sees_field_values_inside_the_region():
    n = 32
    base = sample_whole_plane_gff(n, seed=8)
    block = _block(n, 4, 4, 8, 8)
    inside = np.zeros(n * n, dtype=bool)
    inside[block] = True
    values = np.where(inside.reshape(n, n), base.values, sample_whole_plane_gff(n, seed=9).values)
    resampled = base.with_values(values)
    a, b = block[0], block[-1]
    first = internal_distance(build_metric_graph(base, XI), block, a, b)
    second = internal_distance(build_metric_graph(resampled, XI), block, a, b)
    assert first == second


def test_triangle_inequality_and_symmetry(random_graph, rng):
    vertices = rng.integers(0, random_graph.num_vertices, size=(200, 3))
    for a, b, c in vertices:
        ab = distance(random_graph, a, b)
        assert ab == pytest.approx(distance(random_graph, b, a), rel=1e-12)
        assert distance(random_graph, a, c) <= ab + distance(random_graph, b, c) + 1e-12


# geodesics


def test_flat_axis_geodesic_is_a_straight_run(flat_field):
    graph = build_metric_graph(flat_field, XI)
    path = geodesic(graph, 2 * 16 + 3, 9 * 16 + 3)
    assert len(path) == 8
    assert np.all(path.vertices[:, 1] == path.vertices[0, 1])
    assert path.length == pytest.approx(7 * flat_field.spacing)


def test_flat_diagonal_geodesic_is_monotone_and_minimal(flat_field):
    graph = build_metric_graph(flat_field, XI)
    first = geodesic_vertices(graph, 0, 4 * 16 + 4)
    assert first == geodesic_vertices(graph, 0, 4 * 16 + 4)
    assert len(first) == 9
    rows, cols = np.divmod(np.array(first), 16)
    assert np.all(np.diff(rows) >= 0) and np.all(np.diff(cols) >= 0)


def test_geodesic_length_is_the_distance(random_graph):
    path = geodesic(random_graph, 40, 900)
    assert path.length == pytest.approx(distance(random_graph, 40, 900), rel=1e-12)
    assert path.cumulative_length[0] == 0.0


def test_geodesic_rejects_equal_endpoints(random_graph):
    with pytest.raises(DegenerateInputError):
        geodesic(random_graph, 12, 12)


def test_geodesic_does_not_depend_on_vertex_order(random_graph, rng):
    a, b = 33, 987
    expected = geodesic_vertices(random_graph, a, b)

    perm = rng.permutation(random_graph.num_vertices)
    inverse = np.argsort(perm)
    permuted = random_graph.matrix[perm][:, perm].tocsr()

    distances = dijkstra(permuted, directed=False, indices=inverse[a])
    predecessors = tight_predecessors(permuted, distances, int(inverse[a]))
    walk = [int(inverse[b])]
    while walk[-1] != inverse[a]:
        walk.append(int(predecessors[walk[-1]]))
    assert [int(perm[v]) for v in walk[::-1]] == expected


def test_geodesic_subpaths_are_geodesics(random_graph):
    vertices = geodesic_vertices(random_graph, 70, 950)
    for start, stop in [(0, len(vertices) // 2), (3, len(vertices) - 4), (len(vertices) // 3, len(vertices) - 1)]:
        piece = vertices[start : stop + 1]
        assert path_graph_length(random_graph, piece) == pytest.approx(
            distance(random_graph, piece[0], piece[-1]), rel=1e-12
        )


def test_scaling_the_field_scales_lengths_and_keeps_geodesics(rng):
    field = sample_whole_plane_gff(64, seed=8)
    graph = build_metric_graph(field, XI)
    shifted = build_metric_graph(field.shifted(-0.8), XI)
    factor = math.exp(-0.8 * XI)
    for _ in range(100):
        a, b = (int(v) for v in rng.choice(graph.num_vertices, size=2, replace=False))
        assert distance(shifted, a, b) == pytest.approx(factor * distance(graph, a, b), rel=1e-12)
        assert geodesic_vertices(shifted, a, b) == geodesic_vertices(graph, a, b)


def test_scaling_the_field_scales_annulus_lengths(random_field):
    graph = build_metric_graph(random_field, XI)
    shifted = build_metric_graph(random_field.shifted(-0.8), XI)
    factor = math.exp(-0.8 * XI)
    for length in (annulus_separating_length, annulus_crossing_length):
        assert length(shifted, (0.0, 0.0), 0.5, 0.875) == pytest.approx(
            factor * length(graph, (0.0, 0.0), 0.5, 0.875), rel=1e-12
        )


# balls


def test_flat_ball_of_one_and_a_half_steps(flat_field):
    graph = build_metric_graph(flat_field, XI)
    center = nearest_vertex(graph, (0.1, 0.1))
    ball = metric_ball(graph, center, 1.5 * flat_field.spacing)
    assert ball.member_vertices == {center, center + 1, center - 1, center + 16, center - 16}
    assert ball.boundary_vertices == ball.member_vertices - {center}


def test_small_ball_is_only_the_centre(random_graph):
    center = 500
    smallest = min(random_graph.matrix[center, w] for w in _neighbours(random_graph.size, center))
    ball = metric_ball(random_graph, center, smallest)
    assert ball.member_vertices == {center}


def test_ball_membership_matches_pointwise_distances(random_graph):
    center = 528
    ball = metric_ball(random_graph, center, 0.6)
    distances = shortest_path_tree(random_graph, center).distances
    assert ball.member_vertices == set(np.flatnonzero(distances < 0.6).tolist())
    assert ball.boundary_vertices <= ball.member_vertices
    for v in ball.boundary:
        assert any(w not in ball.member_vertices for w in _neighbours(random_graph.size, int(v)))


def test_geodesic_fan_runs_from_the_boundary_to_the_centre(random_graph):
    ball = metric_ball(random_graph, 528, 0.5)
    fan = geodesic_fan(random_graph, ball)
    centre = random_graph.positions([528])[0]
    assert len(fan) == len(ball.boundary)
    for path, v in zip(fan, ball.boundary):
        assert np.array_equal(path.vertices[0], random_graph.positions([int(v)])[0])
        assert np.array_equal(path.vertices[-1], centre)
        assert path.length == pytest.approx(distance(random_graph, int(v), 528), rel=1e-12)


# annulus lengths


def test_flat_annulus_lengths_are_near_their_euclidean_values():
    field = GridField(np.zeros((64, 64)), 1.0 / 16.0)
    graph = build_metric_graph(field, XI)
    s = field.spacing
    separating = annulus_separating_length(graph, (0.0, 0.0), 0.5, 0.75)
    assert 2.0 * math.pi * 0.5 - 8.0 * s <= separating <= 2.0 * math.pi * 0.75 + 8.0 * s
    crossing = annulus_crossing_length(graph, (0.0, 0.0), 0.5, 0.75)
    assert abs(crossing - 0.25) <= 4.0 * s


def _ring(graph, z, r_in, r_out):
    positions = graph.positions()
    radii = np.hypot(positions[:, 0] - z[0], positions[:, 1] - z[1])
    return positions, radii, set(np.flatnonzero((radii >= r_in) & (radii <= r_out)).tolist())


def test_separating_length_matches_cycle_enumeration():
    graph = build_metric_graph(_unit_spacing_field(10, seed=31), XI)
    z, r_in, r_out = (0.0, 0.0), 2.0, 3.3
    positions, _, ring = _ring(graph, z, r_in, r_out)
    assert len(ring) == 20

    def crosses(u, v):
        (ux, uy), (vx, vy) = positions[u], positions[v]
        return ux > z[0] and vx > z[0] and (uy >= z[1]) != (vy >= z[1])

    best = math.inf
    ordered = sorted(ring)

    def extend(start, v, length, parity, visited):
        nonlocal best
        for w in _neighbours(graph.size, v):
            if w not in ring:
                continue
            step = graph.matrix[v, w]
            flip = parity ^ crosses(v, w)
            if w == start and len(visited) > 2 and flip:
                best = min(best, length + step)
            elif w > start and w not in visited:
                visited.add(w)
                extend(start, w, length + step, flip, visited)
                visited.remove(w)

    for start in ordered:
        extend(start, start, 0.0, False, {start})
    assert annulus_separating_length(graph, z, r_in, r_out) == pytest.approx(best, rel=1e-12)


def _unit_spacing_field(n, seed):
    """A random field on an n x n grid with unit spacing."""
    rng = np.random.default_rng(seed)
    return GridField(rng.standard_normal((n, n)), 1.0)


def test_crossing_length_matches_pairwise_internal_distances():
    graph = build_metric_graph(_unit_spacing_field(10, seed=32), XI)
    z, r_in, r_out = (0.0, 0.0), 2.0, 3.3
    _, radii, ring = _ring(graph, z, r_in, r_out)
    outer = [v for v in ring if any(radii[w] > r_out for w in _neighbours(graph.size, v))]
    inner = [v for v in ring if any(radii[w] < r_in for w in _neighbours(graph.size, v))]
    region = sorted(ring)
    expected = min(internal_distance(graph, region, a, b) if a != b else 0.0 for a in outer for b in inner)
    assert annulus_crossing_length(graph, z, r_in, r_out) == pytest.approx(expected, rel=1e-12)


def test_annulus_errors(random_graph):
    s = random_graph.spacing
    with pytest.raises(InvalidParameterError):
        annulus_crossing_length(random_graph, (0.0, 0.0), s, 0.5)
    with pytest.raises(OutOfDomainError):
        annulus_separating_length(random_graph, (1.5, 0.0), 0.3, 0.6)
    with pytest.raises(ResolutionError):
        annulus_separating_length(random_graph, (0.0, 0.0), 2.0 * s, 2.05 * s)
