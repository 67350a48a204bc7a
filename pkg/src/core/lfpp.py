"""
Liouville first-passage percolation on the 4-neighbour lattice.

Edge (u, v) carries weight spacing * (e^{xi h(u)} + e^{xi h(v)}) / 2.
Vertex ids are v = i * N + j for the field entry values[i, j].
"""

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from core.config import TIE_RTOL, logger
from core.errors import (
    DegenerateInputError,
    InvalidParameterError,
    OutOfDomainError,
    ResolutionError,
)
from core.geometry import PathKind, PlanarPath, Point
from core.grf import GridField


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Weighted lattice graph built from a field."""

    field: GridField
    xi: float
    matrix: sp.csr_matrix = field(repr=False)
    vertex_factors: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.field.size

    @property
    def num_vertices(self) -> int:
        return self.field.size**2

    @property
    def spacing(self) -> float:
        return self.field.spacing

    def edge_weights(self, u, v) -> np.ndarray:
        """Weights of the lattice edges (u[k], v[k]); no adjacency check."""
        u = np.asarray(u)
        v = np.asarray(v)
        return self.spacing * (self.vertex_factors[u] + self.vertex_factors[v]) / 2.0

    def positions(self, vertices=None) -> np.ndarray:
        """Plane positions, shape (k, 2), of the given (default: all) vertices."""
        if vertices is None:
            vertices = np.arange(self.num_vertices)
        vertices = np.asarray(vertices)
        i, j = np.divmod(vertices, self.size)
        origin = self.field.origin
        return np.column_stack([origin[0] + self.spacing * i, origin[1] + self.spacing * j])

    def check_vertex(self, v: int) -> int:
        if not 0 <= v < self.num_vertices:
            raise InvalidParameterError(f"vertex {v} is not in the graph (0..{self.num_vertices - 1})")
        return int(v)


@dataclass(frozen=True, eq=False)
class ShortestPathTree:
    source: int
    distances: np.ndarray
    predecessors: np.ndarray

    def vertices_to(self, target: int) -> List[int]:
        """Vertex sequence from the source to target along the tree."""
        if not np.isfinite(self.distances[target]):
            raise InvalidParameterError(f"vertex {target} is not reachable from {self.source}")
        sequence = [int(target)]
        while sequence[-1] != self.source:
            previous = int(self.predecessors[sequence[-1]])
            if previous < 0:
                raise InvalidParameterError(f"no tight edge into vertex {sequence[-1]}")
            sequence.append(previous)
        return sequence[::-1]


@dataclass(frozen=True, eq=False)
class MetricBall:
    center: int
    radius: float
    members: np.ndarray
    member_distances: np.ndarray
    boundary: np.ndarray

    @property
    def member_vertices(self) -> FrozenSet[int]:
        return frozenset(int(v) for v in self.members)

    @property
    def boundary_vertices(self) -> FrozenSet[int]:
        return frozenset(int(v) for v in self.boundary)


def build_metric_graph(field: GridField, xi: float) -> MetricGraph:
    """Build the LFPP graph of a field with weight exponent xi.

    Edge (u, v) weighs spacing * (e^{xi h(u)} + e^{xi h(v)}) / 2.

    Args:
        field: Lattice field h
        xi: Weight exponent, positive

    Returns:
        MetricGraph over the N x N lattice
    """
    if not xi > 0:
        raise InvalidParameterError(f"xi must be positive, got {xi}")
    n = field.size
    factors = np.exp(xi * field.values).ravel()
    if not np.all(np.isfinite(factors)) or np.any(factors == 0.0):
        raise InvalidParameterError(f"edge weights overflow for xi = {xi}")

    ids = np.arange(n * n).reshape(n, n)
    heads = np.concatenate([ids[:-1, :].ravel(), ids[:, :-1].ravel()])
    tails = np.concatenate([ids[1:, :].ravel(), ids[:, 1:].ravel()])
    weights = field.spacing * (factors[heads] + factors[tails]) / 2.0

    matrix = sp.csr_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
        shape=(n * n, n * n),
    )
    matrix.sort_indices()
    factors.setflags(write=False)
    logger.debug(f"Built LFPP graph: {n}x{n} lattice, {len(weights)} edges, xi={xi}")
    return MetricGraph(field=field, xi=float(xi), matrix=matrix, vertex_factors=factors)


def is_connected(graph: MetricGraph) -> bool:
    count, _ = connected_components(graph.matrix, directed=False)
    return count == 1


def nearest_vertex(graph: MetricGraph, point: Point) -> int:
    fi, fj = graph.field.fractional_index(point)
    top = graph.size - 1
    i = int(min(max(round(fi), 0), top))
    j = int(min(max(round(fj), 0), top))
    return i * graph.size + j


def vertex_position(graph: MetricGraph, v: int) -> Point:
    x, y = graph.positions([graph.check_vertex(v)])[0]
    return (float(x), float(y))


def tight_predecessors(matrix: sp.csr_matrix, distances: np.ndarray, source: int) -> np.ndarray:
    """Smallest-index predecessor over all tight edges.

    Edge (u, v) is tight when dist(u) < dist(v) and dist(u) + w(u, v)
    equals dist(v) up to a relative tolerance. Unreached vertices and the
    source get -1.
    """
    coo = matrix.tocoo()
    u, v, w = coo.row, coo.col, coo.data
    du = distances[u]
    dv = distances[v]
    with np.errstate(invalid="ignore"):
        tight = (
            np.isfinite(du)
            & np.isfinite(dv)
            & (du < dv)
            & (np.abs(du + w - dv) <= TIE_RTOL * np.maximum(dv, np.finfo(float).tiny))
        )
    sentinel = matrix.shape[0]
    predecessors = np.full(matrix.shape[0], sentinel, dtype=np.int64)
    np.minimum.at(predecessors, v[tight], u[tight])
    predecessors[predecessors == sentinel] = -1
    predecessors[source] = -1
    return predecessors


def shortest_path_tree(graph: MetricGraph, source: int, limit: Optional[float] = None) -> ShortestPathTree:
    """Single-source distances with the deterministic tie-broken tree."""
    source = graph.check_vertex(source)
    kwargs = {} if limit is None else {"limit": limit}
    distances = dijkstra(graph.matrix, directed=False, indices=source, **kwargs)
    predecessors = tight_predecessors(graph.matrix, distances, source)
    return ShortestPathTree(source=source, distances=distances, predecessors=predecessors)


def distance(graph: MetricGraph, a: int, b: int) -> float:
    """Exact graph distance between two vertices."""
    a = graph.check_vertex(a)
    b = graph.check_vertex(b)
    if a == b:
        return 0.0
    return float(dijkstra(graph.matrix, directed=False, indices=a)[b])


def path_graph_length(graph: MetricGraph, vertices: Iterable[int]) -> float:
    """Graph length of a sequence of lattice-adjacent vertices."""
    vertices = np.asarray(list(vertices), dtype=np.int64)
    if len(vertices) < 2:
        return 0.0
    for v in (vertices.min(), vertices.max()):
        graph.check_vertex(int(v))
    u, v = vertices[:-1], vertices[1:]
    ui, uj = np.divmod(u, graph.size)
    vi, vj = np.divmod(v, graph.size)
    if np.any(np.abs(ui - vi) + np.abs(uj - vj) != 1):
        raise InvalidParameterError("consecutive vertices must be lattice neighbours")
    return float(np.sum(graph.edge_weights(u, v)))


def path_from_vertices(graph: MetricGraph, vertices: List[int]) -> PlanarPath:
    """Geodesic-kind PlanarPath whose index is cumulative graph length."""
    vertices = np.asarray(vertices, dtype=np.int64)
    steps = graph.edge_weights(vertices[:-1], vertices[1:])
    cumulative = np.concatenate([[0.0], np.cumsum(steps)])
    return PlanarPath(graph.positions(vertices), cumulative, PathKind.GEODESIC)


def geodesic(graph: MetricGraph, a: int, b: int) -> PlanarPath:
    """The shortest path from a to b with smallest-index tie breaking.

    Args:
        graph: LFPP graph
        a: Start vertex id
        b: End vertex id, different from a

    Returns:
        Geodesic-kind PlanarPath indexed by cumulative graph length

    Raises:
        DegenerateInputError: If a == b
    """
    a = graph.check_vertex(a)
    b = graph.check_vertex(b)
    if a == b:
        raise DegenerateInputError(f"geodesic endpoints coincide (vertex {a})")
    tree = shortest_path_tree(graph, a)
    return path_from_vertices(graph, tree.vertices_to(b))


def geodesic_vertices(graph: MetricGraph, a: int, b: int) -> List[int]:
    a = graph.check_vertex(a)
    b = graph.check_vertex(b)
    if a == b:
        raise DegenerateInputError(f"geodesic endpoints coincide (vertex {a})")
    return shortest_path_tree(graph, a).vertices_to(b)


def metric_ball(graph: MetricGraph, center: int, radius: float) -> MetricBall:
    """Open metric ball: vertices at graph distance < radius.

    Args:
        graph: LFPP graph
        center: Centre vertex id
        radius: Metric radius, positive

    Returns:
        MetricBall with members, their distances and the boundary vertices
        that have a neighbour outside the ball
    """
    center = graph.check_vertex(center)
    if not radius > 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    distances = dijkstra(graph.matrix, directed=False, indices=center, limit=radius)
    inside = distances < radius
    members = np.flatnonzero(inside)

    coo = graph.matrix.tocoo()
    exits = inside[coo.row] & ~inside[coo.col]
    boundary = np.unique(coo.row[exits])
    return MetricBall(
        center=center,
        radius=float(radius),
        members=members,
        member_distances=distances[members],
        boundary=boundary,
    )


def geodesic_fan(graph: MetricGraph, ball: MetricBall) -> List[PlanarPath]:
    """Geodesics from every boundary vertex of a ball to its centre."""
    tree = shortest_path_tree(graph, ball.center, limit=ball.radius)
    fan = []
    for v in ball.boundary:
        if v == ball.center:
            continue
        fan.append(path_from_vertices(graph, tree.vertices_to(int(v))[::-1]))
    return fan


def _region_indices(graph: MetricGraph, region) -> np.ndarray:
    region = np.asarray(region)
    if region.dtype == bool:
        if region.size != graph.num_vertices:
            raise InvalidParameterError("region mask must cover every vertex")
        return np.flatnonzero(region.ravel())
    return np.unique(region.astype(np.int64))


def internal_distance(graph: MetricGraph, region, a: int, b: int) -> float:
    """Distance using only edges with both endpoints in the region.

    Returns math.inf when a and b are disconnected inside the region.
    """
    indices = _region_indices(graph, region)
    positions = {int(v): k for k, v in enumerate(indices)}
    if a not in positions or b not in positions:
        raise InvalidParameterError(f"vertices {a} and {b} must both lie in the region")
    if a == b:
        return 0.0
    submatrix = graph.matrix[indices][:, indices]
    value = dijkstra(submatrix, directed=False, indices=positions[a])[positions[b]]
    return float(value) if np.isfinite(value) else math.inf


@dataclass(frozen=True, eq=False)
class _AnnulusLattice:
    vertices: np.ndarray
    submatrix: sp.csr_matrix
    radii: np.ndarray


def _closed_annulus(graph: MetricGraph, z: Point, r_in: float, r_out: float) -> _AnnulusLattice:
    if not 2.0 * graph.spacing <= r_in < r_out:
        raise InvalidParameterError(
            f"need 2*spacing <= r_in < r_out, got r_in={r_in}, r_out={r_out}, spacing={graph.spacing}"
        )
    margin = r_out + graph.spacing
    box = graph.field.extent
    if z[0] - margin < box.x0 or z[1] - margin < box.y0 or z[0] + margin > box.x1 or z[1] + margin > box.y1:
        raise OutOfDomainError(f"annulus around {z} with outer radius {r_out} leaves the grid")
    positions = graph.positions()
    radii = np.hypot(positions[:, 0] - z[0], positions[:, 1] - z[1])
    vertices = np.flatnonzero((radii >= r_in) & (radii <= r_out))
    if len(vertices) == 0:
        raise ResolutionError(f"annulus ({r_in}, {r_out}) around {z} contains no lattice vertex")
    return _AnnulusLattice(
        vertices=vertices,
        submatrix=graph.matrix[vertices][:, vertices].tocoo(),
        radii=radii,
    )


def annulus_separating_length(graph: MetricGraph, z: Point, r_in: float, r_out: float) -> float:
    """Shortest cycle in the closed annulus that separates z from infinity.

    The annulus lattice is doubled along the rightward ray from z: an edge
    crossing the ray switches sheets. A closed walk winds around z an odd
    number of times exactly when it lifts to a path between the two copies
    of a vertex.
    """
    annulus = _closed_annulus(graph, z, r_in, r_out)
    count = len(annulus.vertices)
    coords = graph.positions(annulus.vertices)
    sub = annulus.submatrix
    above = coords[:, 1] >= z[1]
    crosses = (coords[sub.row, 0] > z[0]) & (coords[sub.col, 0] > z[0]) & (above[sub.row] != above[sub.col])

    rows = np.concatenate([sub.row, sub.row + count])
    cols = np.concatenate([
        np.where(crosses, sub.col + count, sub.col),
        np.where(crosses, sub.col, sub.col + count),
    ])
    cover = sp.csr_matrix((np.concatenate([sub.data, sub.data]), (rows, cols)), shape=(2 * count, 2 * count))

    starts = np.unique(sub.row[crosses & ~above[sub.row]])
    if len(starts) == 0:
        raise ResolutionError(f"annulus ({r_in}, {r_out}) around {z} is too thin to hold a lattice cycle")
    lifts = dijkstra(cover, directed=False, indices=starts)
    value = float(np.min(lifts[np.arange(len(starts)), starts + count]))
    if not np.isfinite(value):
        raise ResolutionError(f"annulus ({r_in}, {r_out}) around {z} is too thin to hold a lattice cycle")
    return value


def annulus_crossing_length(graph: MetricGraph, z: Point, r_in: float, r_out: float) -> float:
    """Shortest path inside the closed annulus from its outer to its inner boundary."""
    annulus = _closed_annulus(graph, z, r_in, r_out)
    coo = graph.matrix.tocoo()
    member = np.zeros(graph.num_vertices, dtype=bool)
    member[annulus.vertices] = True
    beyond = annulus.radii > r_out
    hole = annulus.radii < r_in

    outer = np.unique(coo.row[member[coo.row] & beyond[coo.col]])
    inner = np.unique(coo.row[member[coo.row] & hole[coo.col]])
    if len(outer) == 0 or len(inner) == 0:
        raise ResolutionError(f"annulus ({r_in}, {r_out}) around {z} has an empty boundary at this spacing")

    local = -np.ones(graph.num_vertices, dtype=np.int64)
    local[annulus.vertices] = np.arange(len(annulus.vertices))
    reach = dijkstra(annulus.submatrix.tocsr(), directed=False, indices=local[outer], min_only=True)
    value = float(np.min(reach[local[inner]]))
    if not np.isfinite(value):
        raise ResolutionError(f"annulus ({r_in}, {r_out}) around {z} does not connect its boundaries")
    return value
