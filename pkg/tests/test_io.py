"""Round-trip and error-path tests for the on-disk formats."""

import csv

import numpy as np
import pytest

from corestream import CoresetBlock, CoresetTree, DataBlock, validate_view
from corestream import io
from corestream.io import FormatError


def feature_block(rows: int, dim: int, seed: int = 0) -> DataBlock:
    rng = np.random.default_rng(seed)
    return DataBlock(rng.standard_normal((rows, dim)))


def grown_tree(points: int, n: int, dim: int = 3, seed: int = 1) -> CoresetTree:
    tree = CoresetTree(n, dim)
    rng = np.random.default_rng(seed)
    for row in rng.standard_normal((points, dim)):
        tree.push_point(row)
    return tree


def test_text_features_round_trip_exactly(tmp_path):
    path = str(tmp_path / "feat.txt")
    block = feature_block(7, 4)
    io.write_features(path, block)
    back = io.read_features(path)
    assert np.array_equal(back.values, block.values)


def test_binary_features_round_trip_exactly(tmp_path):
    path = str(tmp_path / "feat.bin")
    block = feature_block(9, 5, seed=2)
    io.write_features(path, block, binary=True)
    back = io.read_features(path)
    assert np.array_equal(back.values, block.values)
    with open(path, "rb") as fh:
        assert fh.read(4) == b"CSTK"


def test_reader_sniffs_encoding_by_magic(tmp_path):
    text_path = str(tmp_path / "a")
    bin_path = str(tmp_path / "b")
    block = feature_block(3, 2, seed=3)
    io.write_features(text_path, block)
    io.write_features(bin_path, block, binary=True)
    assert np.array_equal(io.read_features(text_path).values, io.read_features(bin_path).values)


def test_text_parse_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.txt"

    path.write_text("")
    with pytest.raises(FormatError, match="line 1"):
        io.read_features(str(path))

    path.write_text("hello world\n")
    with pytest.raises(FormatError, match="line 1"):
        io.read_features(str(path))

    path.write_text("dim=x rows=2\n")
    with pytest.raises(FormatError, match="line 1"):
        io.read_features(str(path))

    path.write_text("dim=3 rows=2\n1 2 3\n")
    with pytest.raises(FormatError, match="line 3"):
        io.read_features(str(path))

    path.write_text("dim=3 rows=1\n1 2\n")
    with pytest.raises(FormatError, match="line 2"):
        io.read_features(str(path))

    path.write_text("dim=3 rows=1\n1 2 frog\n")
    with pytest.raises(FormatError, match="line 2"):
        io.read_features(str(path))

    path.write_text("dim=3 rows=0\n")
    with pytest.raises(FormatError, match="zero rows"):
        io.read_features(str(path))


def test_binary_parse_errors(tmp_path):
    path = tmp_path / "bad.bin"

    path.write_bytes(b"CSTK\x01\x00")
    with pytest.raises(FormatError, match="truncated header"):
        io.read_features(str(path))

    import struct

    path.write_bytes(b"CSTK" + struct.pack("<IQI", 9, 1, 2) + b"\x00" * 16)
    with pytest.raises(FormatError, match="version"):
        io.read_features(str(path))

    path.write_bytes(b"CSTK" + struct.pack("<IQI", 1, 2, 2) + b"\x00" * 8)
    with pytest.raises(FormatError, match="payload"):
        io.read_features(str(path))

    path.write_bytes(b"CSTK" + struct.pack("<IQI", 1, 0, 2))
    with pytest.raises(FormatError, match="zero rows"):
        io.read_features(str(path))


def test_coreset_block_round_trip(tmp_path):
    path = str(tmp_path / "block.json")
    rng = np.random.default_rng(4)
    cb = CoresetBlock(
        block=DataBlock(rng.standard_normal((3, 4))), c=0.125, source_rows=12
    )
    io.write_coreset(path, cb)
    back = io.read_coreset(path)
    assert np.array_equal(back.block.values, cb.block.values)
    assert back.c == cb.c
    assert back.source_rows == 12


def test_coreset_reader_rejects_foreign_documents(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(FormatError, match="not a coreset-block"):
        io.read_coreset(str(path))
    path.write_text("{not json")
    with pytest.raises(FormatError, match="line 1"):
        io.read_coreset(str(path))
    path.write_text('{"format": "coreset-block", "c": -1, "source_rows": 2, "values": [[1.0]]}')
    with pytest.raises(FormatError):
        io.read_coreset(str(path))


def test_snapshot_round_trip_is_exact(tmp_path):
    path = str(tmp_path / "snap.json")
    tree = grown_tree(23, 4)
    view = tree.snapshot()
    io.write_snapshot(path, view)
    back = io.read_snapshot(path)
    validate_view(back)
    assert back.n == view.n
    assert back.dim == view.dim
    assert back.points_seen == view.points_seen
    assert back.leaves_seen == view.leaves_seen
    assert back.merge_count == view.merge_count
    assert back.max_live_nodes == view.max_live_nodes
    assert len(back.nodes) == len(view.nodes)
    for got, want in zip(back.nodes, view.nodes):
        assert got.level == want.level
        assert got.span == want.span
        assert np.array_equal(got.summary.block.values, want.summary.block.values)
        assert got.summary.c == want.summary.c
        assert got.summary.source_rows == want.summary.source_rows
    assert np.array_equal(back.pending, view.pending)
    with pytest.raises(ValueError):
        back.pending[0, 0] = 1.0


def test_snapshot_reader_rejects_inconsistent_documents(tmp_path):
    import json

    path = tmp_path / "snap.json"
    tree = grown_tree(12, 4)
    io.write_snapshot(str(path), tree.snapshot())
    doc = json.loads(path.read_text())
    doc["points_seen"] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="inconsistent"):
        io.read_snapshot(str(path))

    path.write_text('{"format": "nope"}')
    with pytest.raises(FormatError, match="not a coreset-tree-snapshot"):
        io.read_snapshot(str(path))

    doc.pop("nodes")
    doc["format"] = "coreset-tree-snapshot"
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="bad snapshot"):
        io.read_snapshot(str(path))


def test_telemetry_csv_shape_and_totals(tmp_path):
    path = tmp_path / "telemetry.csv"
    tree = grown_tree(17, 3)
    stats = tree.telemetry()
    io.write_telemetry(str(path), stats, train_seconds=[0.5] + [0.0] * 16)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(io.TELEMETRY_COLUMNS)
    body = rows[1:]
    assert len(body) == 17
    assert [int(r[0]) for r in body] == list(range(17))
    assert sum(int(r[1]) for r in body) == int(body[-1][2]) == stats.merge_count
    assert float(body[0][5]) == 0.5


def test_sample_csv_has_provenance_and_footer(tmp_path):
    from corestream import hierarchical_sample

    path = tmp_path / "sample.csv"
    tree = grown_tree(10, 4)
    sample = hierarchical_sample(tree.snapshot())
    io.write_sample(str(path), sample, mode="hierarchical")
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("level,row,f0")
    assert lines[-1] == f"# mode=hierarchical rows={sample.rows.rows} limit=8"
    assert len(lines) == sample.rows.rows + 2


def test_track_csv_round_trips_values(tmp_path):
    from corestream import SyntheticStreamConfig, TrackerParams, generate_stream, track_stream

    config = SyntheticStreamConfig(dim=6, frames=24, seed=5)
    run = track_stream(generate_stream(config), config, tracker=TrackerParams(n=8))
    path = tmp_path / "run.csv"
    io.write_track_run(str(path), run)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(io.TRACK_COLUMNS)
    assert len(rows) == 1 + len(run.records)
    for row, record in zip(rows[1:], run.records):
        assert int(row[0]) == record.index
        assert int(row[1]) == record.chosen
        assert float(row[3]) == record.estimate[0]
        assert int(row[5]) == int(record.correct)
        assert int(row[6]) == record.model_points
