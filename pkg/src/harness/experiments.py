"""
Experiment handlers. Each experiment has a per-replica step, run in the
worker pool with its own seed, and an aggregate step run once by the
coordinator over the ordered replica outcomes.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from core.analysis import (
    box_counting_dimension,
    decay_ratios,
    holder_modulus,
    shadow_sum_by_depth,
    shadow_sum_estimate,
    whitney_decomposition,
)
from core.config import logger
from core.crossings import (
    CrossingReport,
    geodesic_crossing_experiment,
    max_crossings_over_grid,
    merge_reports,
    sample_far_pairs,
    scale_scan,
)
from core.geometry import PlanarPath, Rectangle
from core.grf import (
    GridField,
    circle_average,
    circle_average_variance,
    dirichlet_green_matrix,
    good_scale_report,
    lqg_measure,
    max_feasible_scales,
    sample_whole_plane_gff,
    sample_zero_boundary_gff,
)
from core.lfpp import (
    MetricGraph,
    build_metric_graph,
    geodesic_fan,
    metric_ball,
    nearest_vertex,
    path_from_vertices,
    shortest_path_tree,
)
from core.loewner import (
    chordal_trace,
    initial_radius_exponent,
    loewner_angle_process,
    sample_driving,
    whole_plane_trace_from_driving,
)
from core.storage import (
    DEPTH_COLUMNS,
    DIMENSION_COLUMNS,
    MODULUS_COLUMNS,
    crossing_summary,
    scale_summary,
    write_ball,
    write_crossing_report,
    write_fan,
    write_field,
    write_json,
    write_path,
    write_rows,
    write_scale_scan,
)
from harness.render import render_ball, render_crossings, render_field, render_trace
from harness.schema import ExperimentConfig, ExperimentKind

# Largest zero-boundary grid for which the dense Green's function is reported
DENSE_GREEN_LIMIT = 64
DIMENSION_SCALES = 6


@dataclass
class ReplicaOutcome:
    index: int
    seed: int
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    payload: Any = None


Aggregate = Tuple[List[Path], Dict[str, Any]]


@dataclass(frozen=True)
class Experiment:
    replica: Callable[[ExperimentConfig, int, int, Path], ReplicaOutcome]
    aggregate: Callable[[ExperimentConfig, List[ReplicaOutcome], Path], Aggregate]


def derive_seed(seed: int, *key: int) -> int:
    """Independent child seed for (seed, key...)."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def sample_field(config: ExperimentConfig, seed: int) -> GridField:
    if config.boundary == "zero":
        return sample_zero_boundary_gff(config.grid_size, config.spacing, derive_seed(seed, 0))
    return sample_whole_plane_gff(config.grid_size, config.spacing, derive_seed(seed, 0))


def sample_graph(config: ExperimentConfig, seed: int) -> Tuple[GridField, MetricGraph]:
    gff = sample_field(config, seed)
    return gff, build_metric_graph(gff, config.xi)


def sample_trace(config: ExperimentConfig, seed: int) -> PlanarPath:
    driving = sample_driving(config.kappa, config.horizon, config.dt, derive_seed(seed, 1))
    if config.sle_variant == "whole_plane":
        return whole_plane_trace_from_driving(driving, config.stride)
    return chordal_trace(driving, config.stride)


def trace_region(variant: str, horizon: float, dt: float) -> Rectangle:
    """Centre-grid region for trace crossings, scaled to the size of the trace."""
    if variant == "whole_plane":
        radius = math.exp(horizon - initial_radius_exponent(dt))
        return Rectangle(-radius, -radius, radius, radius)
    scale = math.sqrt(horizon)
    return Rectangle(-scale, 0.0, scale, scale)


def _name(stem: str, index: int, suffix: str) -> str:
    return f"{stem}_{index:03d}{suffix}"


def _summaries(outcomes: List[ReplicaOutcome]) -> List[Dict[str, Any]]:
    return [dict(outcome.summary, replica=outcome.index, seed=outcome.seed) for outcome in outcomes]


# field


def field_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    gff = sample_field(config, seed)
    files = [write_field(out / _name("field", index, ".grf"), gff)]
    files.append(render_field(gff, out / _name("field", index, ".png")))

    center = gff.center
    averages = {}
    for epsilon in config.epsilon_list:
        if epsilon >= 2.0 * gff.spacing:
            averages[repr(epsilon)] = circle_average(gff, center, epsilon)

    box = gff.extent
    quarter = Rectangle(
        center[0] - box.width / 4.0,
        center[1] - box.height / 4.0,
        center[0] + box.width / 4.0,
        center[1] + box.height / 4.0,
    )
    summary = {
        "mean": float(gff.values.mean()),
        "std": float(gff.values.std()),
        "center_vertex_value": float(gff.values[gff.size // 2, gff.size // 2]),
        "circle_averages": averages,
        "lqg_measure_central_quarter": lqg_measure(gff, config.gamma, quarter),
    }
    base = config.scan_radius
    scales = min(config.K, max_feasible_scales(base, gff.spacing))
    if scales >= 1:
        report = good_scale_report(gff, center, base, scales, config.M)
        summary["good_scales"] = {
            "K": scales,
            "per_scale_good": list(report.per_scale_good),
            "fraction_good": report.fraction_good,
        }
    return ReplicaOutcome(index, seed, files, summary)


def field_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    summary: Dict[str, Any] = {"replicas": _summaries(outcomes), "normalization": config.boundary}
    keys = sorted(outcomes[0].summary["circle_averages"], key=float, reverse=True)
    rows = [
        (outcome.index, float(key), outcome.summary["circle_averages"][key]) for outcome in outcomes for key in keys
    ]
    files = [write_rows(out / "circle_averages.csv", ("replica", "epsilon", "average"), rows)]

    variances = {}
    for key in keys:
        values = np.array([outcome.summary["circle_averages"][key] for outcome in outcomes])
        entry = {"empirical": float(values.var(ddof=1)) if len(values) > 1 else None}
        if config.boundary == "whole_plane":
            entry["exact"] = circle_average_variance(config.grid_size, config.spacing, float(key))
        variances[key] = entry
    summary["circle_average_variance"] = variances

    if config.boundary == "zero" and config.grid_size <= DENSE_GREEN_LIMIT:
        n = config.grid_size - 2
        k = (config.grid_size // 2 - 1) * n + (config.grid_size // 2 - 1)
        values = np.array([outcome.summary["center_vertex_value"] for outcome in outcomes])
        summary["center_vertex_variance"] = {
            "exact": float(dirichlet_green_matrix(config.grid_size)[k, k]),
            "empirical": float(values.var(ddof=1)) if len(values) > 1 else None,
        }

    files.append(write_json(out / "field_summary.json", summary))
    return files, summary


# geodesic / ball


def geodesic_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    _, graph = sample_graph(config, seed)
    pairs = sample_far_pairs(graph, config.num_pairs, np.random.default_rng(derive_seed(seed, 2)))
    files = []
    records = []
    for k, (a, b) in enumerate(pairs):
        tree = shortest_path_tree(graph, a)
        path = path_from_vertices(graph, tree.vertices_to(b))
        files.append(write_path(out / f"geodesic_{index:03d}_{k:02d}.csv", path))
        records.append(
            {"a": a, "b": b, "distance": float(tree.distances[b]), "vertices": len(path), "diameter": path.diameter}
        )
        if k == 0:
            files.append(render_trace(path, out / _name("geodesic", index, ".png")))
    return ReplicaOutcome(index, seed, files, {"pairs": records})


def geodesic_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    summary = {"replicas": _summaries(outcomes)}
    return [write_json(out / "geodesic_summary.json", summary)], summary


def default_ball_radius(graph: MetricGraph, distances: np.ndarray, center: int) -> float:
    """Largest metric radius whose ball stays inside the Euclidean disk of a quarter grid side."""
    positions = graph.positions()
    origin = graph.positions([center])[0]
    far = np.hypot(*(positions - origin).T) >= graph.size * graph.spacing / 4.0
    return float(distances[far].min())


def ball_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    gff, graph = sample_graph(config, seed)
    center = nearest_vertex(graph, gff.center)
    radius = config.ball_radius
    if radius is None:
        radius = default_ball_radius(graph, shortest_path_tree(graph, center).distances, center)
    ball = metric_ball(graph, center, radius)
    fan = geodesic_fan(graph, ball)
    files = [
        write_ball(out / _name("ball", index, ".csv"), graph, ball),
        write_fan(out / _name("fan", index, ".csv"), fan),
    ]
    files.append(
        render_ball(
            graph.positions(ball.members), ball.member_distances, out / _name("ball", index, ".png"), [p.vertices for p in fan]
        )
    )
    summary = {
        "center": center,
        "radius": radius,
        "members": len(ball.members),
        "boundary": len(ball.boundary),
        "fan_lengths": [path.length for path in fan],
    }
    return ReplicaOutcome(index, seed, files, summary)


def ball_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    summary = {"replicas": _summaries(outcomes)}
    return [write_json(out / "ball_summary.json", summary)], summary


# sle


def sle_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    driving = sample_driving(config.kappa, config.horizon, config.dt, derive_seed(seed, 1))
    if config.sle_variant == "whole_plane":
        trace = whole_plane_trace_from_driving(driving, config.stride)
    else:
        trace = chordal_trace(driving, config.stride)
    files = [
        write_path(out / _name("trace", index, ".csv"), trace),
        render_trace(trace, out / _name("trace", index, ".png")),
    ]
    end = trace.vertices[-1]
    summary = {
        "variant": config.sle_variant,
        "points": len(trace),
        "endpoint": [float(end[0]), float(end[1])],
        "diameter": trace.diameter,
        "max_step": trace.max_step,
    }
    if config.sle_variant == "chordal":
        angle = loewner_angle_process(driving, 0.5j * math.sqrt(config.horizon))
        summary["angle_process"] = {"absorbed": angle.absorbed, "absorbed_at": angle.absorbed_at, "final": angle.final}
    return ReplicaOutcome(index, seed, files, summary)


def sle_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    summary = {"replicas": _summaries(outcomes)}
    return [write_json(out / "sle_summary.json", summary)], summary


# crossings / compare


def trace_crossing_reports(config: ExperimentConfig, seed: int) -> List[CrossingReport]:
    trace = sample_trace(config, seed)
    region = trace_region(config.sle_variant, config.horizon, config.dt)
    return [max_crossings_over_grid(trace, epsilon, config.alpha, region, epsilon / 2.0) for epsilon in config.epsilon_list]


def graph_crossing_reports(config: ExperimentConfig, seed: int) -> List[CrossingReport]:
    _, graph = sample_graph(config, seed)
    return geodesic_crossing_experiment(graph, config.num_pairs, config.epsilon_list, config.alpha, derive_seed(seed, 2))


def _report_summaries(reports: List[CrossingReport]) -> List[Dict[str, Any]]:
    return [{"epsilon": r.epsilon, "max_count": r.max_count, "samples": r.samples} for r in reports]


def crossings_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    if config.path_source == "sle":
        reports = trace_crossing_reports(config, seed)
    else:
        reports = graph_crossing_reports(config, seed)
    return ReplicaOutcome(index, seed, [], {"reports": _report_summaries(reports)}, reports)


def _merge_per_epsilon(config: ExperimentConfig, per_replica: List[List[CrossingReport]]) -> List[CrossingReport]:
    return [merge_reports([reports[k] for reports in per_replica]) for k in range(len(config.epsilon_list))]


def _write_merged(reports: List[CrossingReport], out: Path, stem: str) -> Tuple[List[Path], List[Dict[str, Any]]]:
    files = []
    for k, report in enumerate(reports):
        table = out / f"{stem}_eps{k}.csv"
        files.append(write_crossing_report(table, report))
        rows = np.array([[x, y, count] for (x, y), count in report.per_center], dtype=float).reshape(-1, 3)
        files.append(render_crossings(rows, out / f"{stem}_eps{k}.png", f"{stem}, epsilon = {report.epsilon:g}"))
    return files, [crossing_summary(report) for report in reports]


def _nonincreasing(values: List[float]) -> bool:
    return all(later <= earlier for earlier, later in zip(values, values[1:]))


def crossings_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    reports = _merge_per_epsilon(config, [outcome.payload for outcome in outcomes])
    stem = "crossings_sle" if config.path_source == "sle" else "crossings_geodesic"
    files, summaries = _write_merged(reports, out, stem)
    by_epsilon = sorted(summaries, key=lambda s: -s["epsilon"])
    summary = {
        "path_source": config.path_source,
        "reports": summaries,
        "exceed_frequency_nonincreasing": _nonincreasing([s["exceed_frequency"] for s in by_epsilon]),
    }
    files.append(write_json(out / "crossings_summary.json", summary))
    return files, summary


def compare_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    geodesic_reports = graph_crossing_reports(config, seed)
    trace_reports = trace_crossing_reports(config, seed)
    summary = {"geodesic": _report_summaries(geodesic_reports), "sle": _report_summaries(trace_reports)}
    return ReplicaOutcome(index, seed, [], summary, (geodesic_reports, trace_reports))


def compare_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    geodesic = _merge_per_epsilon(config, [outcome.payload[0] for outcome in outcomes])
    traces = _merge_per_epsilon(config, [outcome.payload[1] for outcome in outcomes])
    files, geodesic_summaries = _write_merged(geodesic, out, "crossings_geodesic")
    trace_files, trace_summaries = _write_merged(traces, out, "crossings_sle")
    files.extend(trace_files)

    rows = [
        (g.epsilon, g.max_count, g.exceed_frequency, t.max_count, t.exceed_frequency)
        for g, t in zip(geodesic, traces)
    ]
    columns = ("epsilon", "geodesic_max", "geodesic_exceed_frequency", "sle_max", "sle_exceed_frequency")
    files.append(write_rows(out / "compare_summary.csv", columns, rows))
    summary = {"geodesic": geodesic_summaries, "sle": trace_summaries, "table": [dict(zip(columns, row)) for row in rows]}
    files.append(write_json(out / "compare_summary.json", summary))
    return files, summary


# scales


def scales_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    gff, graph = sample_graph(config, seed)
    center = gff.center
    scan = scale_scan(graph, center, config.scan_radius, config.K, config.c)
    goodness = good_scale_report(gff, center, config.scan_radius, config.K, config.M)
    files = [write_scale_scan(out / _name("scales", index, ".csv"), scan)]
    summary = dict(scale_summary(scan), per_scale_good=list(goodness.per_scale_good), fraction_good=goodness.fraction_good)
    return ReplicaOutcome(index, seed, files, summary)


def scales_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    good = np.array([outcome.summary["per_scale_good"] for outcome in outcomes], dtype=float)
    fraction_good = np.array([outcome.summary["fraction_good"] for outcome in outcomes])
    summary = {
        "replicas": _summaries(outcomes),
        "mean_fraction_L1_le_cL2": float(np.mean([o.summary["N_K_c"] / config.K for o in outcomes])),
        "mean_fraction_S1_lt_S2": float(np.mean([o.summary["S1_less_S2"] / config.K for o in outcomes])),
        "mean_fraction_good": float(fraction_good.mean()),
        "per_scale_good_frequency": good.mean(axis=0).tolist(),
        "mean_of_per_scale_frequencies": float(good.mean()),
    }
    return [write_json(out / "scales_summary.json", summary)], summary


# dimension / removability


def dyadic_scales(spacing: float, count: int = DIMENSION_SCALES) -> List[float]:
    """count dyadic scales, decreasing, the finest strictly above two lattice steps."""
    finest = 2.0 ** math.ceil(math.log2(2.0 * spacing))
    if finest <= 2.0 * spacing:
        finest *= 2.0
    return [finest * 2.0**j for j in range(count - 1, -1, -1)]


def straight_control_slope(config: ExperimentConfig) -> float:
    s = config.lattice_spacing
    half = config.grid_size * s / 4.0
    count = int(round(2.0 * half / s)) + 1
    points = np.column_stack([np.linspace(-half, half, count), np.full(count, 0.3 * s)])
    return box_counting_dimension(PlanarPath.from_points(points), dyadic_scales(s))[1]


def dimension_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    _, graph = sample_graph(config, seed)
    pairs = sample_far_pairs(graph, config.num_pairs, np.random.default_rng(derive_seed(seed, 2)))
    scales = dyadic_scales(graph.spacing)
    files = []
    records = []
    for k, (a, b) in enumerate(pairs):
        path = path_from_vertices(graph, shortest_path_tree(graph, a).vertices_to(b))
        counts, slope = box_counting_dimension(path, scales)
        moduli = [holder_modulus(path, delta) for delta in config.delta_list]
        files.append(write_rows(out / f"dimension_{index:03d}_{k:02d}.csv", DIMENSION_COLUMNS, zip(scales, counts)))
        files.append(write_rows(out / f"modulus_{index:03d}_{k:02d}.csv", MODULUS_COLUMNS, zip(config.delta_list, moduli)))
        records.append({"slope": slope, "counts": counts, "moduli": moduli})
    return ReplicaOutcome(index, seed, files, {"scales": scales, "geodesics": records})


def dimension_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    slopes = [g["slope"] for outcome in outcomes for g in outcome.summary["geodesics"]]
    summary = {
        "replicas": _summaries(outcomes),
        "mean_slope": float(np.mean(slopes)),
        "max_slope": float(np.max(slopes)),
        "straight_control_slope": straight_control_slope(config),
    }
    return [write_json(out / "dimension_summary.json", summary)], summary


def removability_replica(config: ExperimentConfig, index: int, seed: int, out: Path) -> ReplicaOutcome:
    gff, graph = sample_graph(config, seed)
    (a, b), = sample_far_pairs(graph, 1, np.random.default_rng(derive_seed(seed, 2)))
    path = path_from_vertices(graph, shortest_path_tree(graph, a).vertices_to(b))
    box = gff.extent
    s = gff.spacing
    box = Rectangle(box.x0 - s, box.y0 - s, box.x1 + s, box.y1 + s)

    decomposition = whitney_decomposition(path, box, config.max_depth)
    within_band = [cube.side / 8.0 <= cube.distance <= 8.0 * cube.side for cube in decomposition]
    estimates, total = shadow_sum_estimate(path, decomposition.cubes, config.walkers_per_cube, derive_seed(seed, 3))
    per_depth = shadow_sum_by_depth(estimates)
    files = [write_rows(out / _name("shadow", index, ".csv"), DEPTH_COLUMNS, per_depth)]
    summary = {
        "cubes": len(decomposition),
        "shortfall": len(decomposition.shortfall),
        "counts_by_depth": decomposition.counts_by_depth(),
        "factor_8_fraction": float(np.mean(within_band)) if within_band else 1.0,
        "band_fraction": decomposition.band_fraction(),
        "shadow_sum": total,
        "decay_ratios": decay_ratios(per_depth),
        "proxy": True,
    }
    return ReplicaOutcome(index, seed, files, summary)


def removability_aggregate(config: ExperimentConfig, outcomes: List[ReplicaOutcome], out: Path) -> Aggregate:
    summary = {
        "replicas": _summaries(outcomes),
        "factor_8_fraction": float(np.mean([o.summary["factor_8_fraction"] for o in outcomes])),
        "band_fraction": float(np.mean([o.summary["band_fraction"] for o in outcomes])),
        "proxy": True,
        "note": "shadow diameters are harmonic-measure estimates, not conformal shadows",
    }
    return [write_json(out / "removability_summary.json", summary)], summary


EXPERIMENTS: Dict[ExperimentKind, Experiment] = {
    ExperimentKind.FIELD: Experiment(field_replica, field_aggregate),
    ExperimentKind.GEODESIC: Experiment(geodesic_replica, geodesic_aggregate),
    ExperimentKind.BALL: Experiment(ball_replica, ball_aggregate),
    ExperimentKind.SLE: Experiment(sle_replica, sle_aggregate),
    ExperimentKind.CROSSINGS: Experiment(crossings_replica, crossings_aggregate),
    ExperimentKind.SCALES: Experiment(scales_replica, scales_aggregate),
    ExperimentKind.DIMENSION: Experiment(dimension_replica, dimension_aggregate),
    ExperimentKind.REMOVABILITY: Experiment(removability_replica, removability_aggregate),
    ExperimentKind.COMPARE: Experiment(compare_replica, compare_aggregate),
}


def get_experiment(kind: ExperimentKind) -> Experiment:
    logger.debug(f"Dispatching experiment {kind.value}")
    return EXPERIMENTS[ExperimentKind(kind)]
