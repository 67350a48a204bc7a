import math
import struct

import numpy as np
import pytest

from core.crossings import CrossingReport, ScaleRow, ScaleScan
from core.errors import FileFormatError
from core.geometry import PathKind, PlanarPath
from core.grf import sample_whole_plane_gff
from core.lfpp import build_metric_graph, geodesic_fan, metric_ball, nearest_vertex
from core.storage import (
    BALL_COLUMNS,
    CROSSING_COLUMNS,
    PATH_COLUMNS,
    crossing_summary,
    file_digest,
    read_fan,
    read_field,
    read_json,
    read_path,
    read_rows,
    scale_summary,
    write_ball,
    write_crossing_report,
    write_fan,
    write_field,
    write_field_csv,
    write_json,
    write_path,
    write_rows,
    write_scale_scan,
)


class TestFieldFiles:
    def test_layout_and_reload(self, tmp_path, random_field):
        target = write_field(tmp_path / "h.grf", random_field)
        data = target.read_bytes()
        assert len(data) == 16 + 8 * 32 * 32
        assert data[:4] == b"GRF1"
        assert struct.unpack("<I", data[4:8])[0] == 32
        assert struct.unpack("<d", data[8:16])[0] == random_field.spacing
        assert struct.unpack("<d", data[16:24])[0] == random_field.values[0, 0]
        assert struct.unpack("<d", data[24:32])[0] == random_field.values[0, 1]

        loaded = read_field(target)
        np.testing.assert_array_equal(loaded.values, random_field.values)
        assert loaded.spacing == random_field.spacing
        assert loaded.origin == random_field.origin

    def test_same_field_same_bytes(self, tmp_path, random_field):
        a = write_field(tmp_path / "a.grf", random_field)
        b = write_field(tmp_path / "b.grf", random_field)
        assert file_digest(a) == file_digest(b)

    def test_bad_magic(self, tmp_path, random_field):
        target = write_field(tmp_path / "h.grf", random_field)
        target.write_bytes(b"GRF2" + target.read_bytes()[4:])
        with pytest.raises(FileFormatError) as info:
            read_field(target)
        assert info.value.offset == 0

    def test_truncated_header(self, tmp_path):
        target = tmp_path / "h.grf"
        target.write_bytes(b"GRF1\x10\x00")
        with pytest.raises(FileFormatError) as info:
            read_field(target)
        assert info.value.offset == 6

    def test_truncated_values(self, tmp_path, random_field):
        target = write_field(tmp_path / "h.grf", random_field)
        target.write_bytes(target.read_bytes()[:-8])
        with pytest.raises(FileFormatError) as info:
            read_field(target)
        assert info.value.offset == 16 + 8 * 32 * 32 - 8

    def test_small_grid_size(self, tmp_path):
        target = tmp_path / "h.grf"
        target.write_bytes(b"GRF1" + struct.pack("<I", 4) + struct.pack("<d", 0.5) + bytes(8 * 16))
        with pytest.raises(FileFormatError) as info:
            read_field(target)
        assert info.value.offset == 4

    def test_non_finite_value_offset(self, tmp_path, flat_field):
        target = write_field(tmp_path / "h.grf", flat_field)
        data = bytearray(target.read_bytes())
        k = 3 * 16 + 5
        data[16 + 8 * k : 24 + 8 * k] = struct.pack("<d", math.nan)
        target.write_bytes(bytes(data))
        with pytest.raises(FileFormatError) as info:
            read_field(target)
        assert info.value.offset == 16 + 8 * k

    def test_csv_export_rows_are_lattice_rows(self, tmp_path, flat_field):
        field = flat_field.with_values(np.arange(256, dtype=float).reshape(16, 16))
        target = write_field_csv(tmp_path / "h.csv", field)
        table = read_rows(target, [f"c{j}" for j in range(16)])
        np.testing.assert_array_equal(table, field.values)


class TestTables:
    def test_floats_use_repr(self, tmp_path):
        target = write_rows(tmp_path / "t.csv", ("a", "b"), [(0.1, np.int64(3)), (1 / 3, 2)])
        assert target.read_text().splitlines() == ["a,b", "0.1,3", f"{1 / 3!r},2"]
        np.testing.assert_array_equal(read_rows(target, ("a", "b")), [[0.1, 3.0], [1 / 3, 2.0]])

    def test_header_mismatch(self, tmp_path):
        target = write_rows(tmp_path / "t.csv", ("a", "b"), [(1, 2)])
        with pytest.raises(FileFormatError) as info:
            read_rows(target, ("a", "c"))
        assert info.value.offset == 0

    def test_column_count_offset(self, tmp_path):
        target = tmp_path / "t.csv"
        target.write_text("a,b\n1,2\n3\n")
        with pytest.raises(FileFormatError) as info:
            read_rows(target, ("a", "b"))
        assert info.value.offset == len("a,b\n1,2\n")

    def test_unparsable_number(self, tmp_path):
        target = tmp_path / "t.csv"
        target.write_text("a,b\n1,x\n")
        with pytest.raises(FileFormatError) as info:
            read_rows(target, ("a", "b"))
        assert info.value.offset == 4

    def test_empty_file(self, tmp_path):
        target = tmp_path / "t.csv"
        target.write_text("")
        with pytest.raises(FileFormatError):
            read_rows(target, ("a",))

    def test_header_only_gives_empty_table(self, tmp_path):
        target = write_rows(tmp_path / "t.csv", ("a", "b"), [])
        assert read_rows(target, ("a", "b")).shape == (0, 2)


class TestPathFiles:
    def test_geodesic_columns(self, tmp_path):
        path = PlanarPath(np.array([[0.0, 0.0], [0.25, 0.0], [0.25, 0.25]]), np.array([0.0, 0.3, 0.7]), PathKind.GEODESIC)
        target = write_path(tmp_path / "g.csv", path)
        assert target.read_text().splitlines()[0] == ",".join(PATH_COLUMNS)
        loaded = read_path(target)
        assert loaded.kind is PathKind.GEODESIC
        np.testing.assert_array_equal(loaded.vertices, path.vertices)
        np.testing.assert_array_equal(loaded.cumulative_length, path.cumulative_length)

    def test_trace_columns(self, tmp_path):
        path = PlanarPath.from_points([(0.0, 0.0), (0.0, 0.2), (0.1, 0.3)], PathKind.SLE_TRACE, times=[0.0, 0.01, 0.02])
        target = write_path(tmp_path / "t.csv", path)
        assert target.read_text().splitlines()[0] == "index,t,x,y"
        loaded = read_path(target)
        assert loaded.kind is PathKind.SLE_TRACE
        np.testing.assert_array_equal(loaded.times, path.times)
        np.testing.assert_array_equal(loaded.vertices, path.vertices)

    def test_fan_and_ball(self, tmp_path):
        graph = build_metric_graph(sample_whole_plane_gff(16, seed=2), 0.41)
        ball = metric_ball(graph, nearest_vertex(graph, (0.0, 0.0)), 0.8)
        fan = geodesic_fan(graph, ball)
        groups = read_fan(write_fan(tmp_path / "fan.csv", fan))
        assert len(groups) == len(fan)
        for points, geodesic in zip(groups, fan):
            np.testing.assert_array_equal(points, geodesic.vertices)

        table = read_rows(write_ball(tmp_path / "ball.csv", graph, ball), BALL_COLUMNS)
        assert len(table) == len(ball.members)
        assert np.all(table[:, 2] < ball.radius)


def _scan():
    rows = (ScaleRow(1, 0.5, 2.0, 0.25, 1.5, 0.125), ScaleRow(2, 0.25, 1.0, 0.5, 0.5, 0.75))
    return ScaleScan(center=(0.0, 0.0), base_radius=1.0, c=4.0, per_scale=rows)


class TestSummaries:
    def test_crossing_report(self, tmp_path):
        report = CrossingReport(
            epsilon=0.25,
            alpha=1.2,
            path_kind=PathKind.SLE_TRACE,
            per_center=(((0.0, 0.0), 2), ((0.125, 0.0), 7)),
            max_count=7,
            sample_max_counts=(7, 3),
        )
        table = read_rows(write_crossing_report(tmp_path / "c.csv", report), CROSSING_COLUMNS)
        np.testing.assert_array_equal(table, [[0.0, 0.0, 2.0], [0.125, 0.0, 7.0]])
        summary = crossing_summary(report)
        assert summary["path_kind"] == "sle_trace"
        assert summary["argmax_center"] == [0.125, 0.0]
        assert summary["exceed_frequency"] == 0.5
        assert summary["samples"] == 2

    def test_scale_scan(self, tmp_path):
        scan = _scan()
        table = read_rows(write_scale_scan(tmp_path / "s.csv", scan), ("k", "radius", "L1", "L2", "S1", "S2"))
        assert table.shape == (2, 6)
        summary = scale_summary(scan)
        assert summary["N_K_c"] == 1
        assert summary["S1_less_S2"] == 1
        assert summary["ratios_L1_L2"] == [8.0, 2.0]


class TestJson:
    def test_numpy_and_enum_values(self, tmp_path):
        payload = {
            "count": np.int64(4),
            "values": np.array([0.5, 1.5]),
            "missing": math.nan,
            "kind": PathKind.GEODESIC,
            "where": tmp_path / "x",
            3: "key",
        }
        loaded = read_json(write_json(tmp_path / "s.json", payload))
        assert loaded == {
            "count": 4,
            "values": [0.5, 1.5],
            "missing": None,
            "kind": "geodesic",
            "where": (tmp_path / "x").as_posix(),
            "3": "key",
        }

    def test_sorted_keys_give_stable_bytes(self, tmp_path):
        a = write_json(tmp_path / "a.json", {"b": 1, "a": 2})
        b = write_json(tmp_path / "b.json", {"a": 2, "b": 1})
        assert file_digest(a) == file_digest(b)

    def test_parse_error_offset(self, tmp_path):
        target = tmp_path / "bad.json"
        target.write_text('{"a": 1,, }')
        with pytest.raises(FileFormatError) as info:
            read_json(target)
        assert info.value.offset == 8
