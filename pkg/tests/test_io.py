import json
import math

import numpy as np
import pytest

from lqg_geodesy.field import GridSpec, mollify, normalize, sample_gff
from lqg_geodesy.io import read_csv, read_dfield, read_fgrid, write_csv, write_dfield, write_fgrid, write_json
from lqg_geodesy.metric import NO_PRED, sssp


def test_fgrid_round_trip_is_exact(tmp_path, spec64):
    f = mollify(normalize(sample_gff(spec64, 11)), 3 * spec64.mesh)
    back = read_fgrid(write_fgrid(tmp_path / "a.fgrid", f))
    assert np.array_equal(back.values, f.values)
    assert back.spec == f.spec
    assert (back.seed, back.provenance, back.normalization, back.epsilon) == \
        (f.seed, f.provenance, f.normalization, f.epsilon)


def test_fgrid_raw_field_has_no_epsilon(tmp_path):
    spec = GridSpec(16, 0.25, (0.5, -0.5))
    back = read_fgrid(write_fgrid(tmp_path / "r.fgrid", sample_gff(spec, 0)))
    assert back.epsilon is None and back.spec.origin_offset == (0.5, -0.5)


def test_fgrid_layout_is_header_then_little_endian_rows(tmp_path, spec64):
    f = sample_gff(spec64, 2)
    raw = write_fgrid(tmp_path / "b.fgrid", f).read_bytes()
    head, body = raw.split(b"\n", 1)
    assert json.loads(head)["side_count"] == 64
    assert np.array_equal(np.frombuffer(body, "<f8").reshape(64, 64), f.values)


def test_fgrid_rejects_truncated_files(tmp_path, spec64):
    p = write_fgrid(tmp_path / "c.fgrid", sample_gff(spec64, 0))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_fgrid(p)
    p.write_bytes(b'{"side_count": 16}')
    with pytest.raises(ValueError):
        read_fgrid(p)


def test_dfield_round_trip(tmp_path, weights64):
    mf = sssp(weights64, 123)
    back, header = read_dfield(write_dfield(tmp_path / "d.dfield", mf, {"seed": 4, "gamma": 1.5}))
    assert np.array_equal(back.distances, mf.distances)
    assert np.array_equal(back.predecessors, mf.predecessors)
    assert back.predecessors[123] == NO_PRED
    assert (back.source, back.shape) == (123, mf.shape)
    assert header["seed"] == 4 and header["gamma"] == 1.5


def test_dfield_rejects_truncated_files(tmp_path, weights64):
    p = write_dfield(tmp_path / "e.dfield", sssp(weights64, 0))
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(ValueError):
        read_dfield(p)


def test_csv_round_trip_keeps_floats_exact(tmp_path):
    vals = [0.1, 1 / 3, math.pi * 1e-17, np.float64(2.5e300)]
    p = write_csv(tmp_path / "x.csv", ["i", "x", "flag"],
                  [[np.int64(i), v, np.bool_(i % 2)] for i, v in enumerate(vals)])
    rows = read_csv(p)
    assert [float(r["x"]) for r in rows] == [float(v) for v in vals]
    assert [r["flag"] for r in rows] == ["0", "1", "0", "1"]
    assert [r["i"] for r in rows] == ["0", "1", "2", "3"]


def test_json_writes_numpy_values_with_sorted_keys(tmp_path):
    p = write_json(tmp_path / "y.json", {"b": np.int32(3), "a": np.array([1.5, 2.0]), "c": np.bool_(True),
                                         "d": np.float32(0.5)})
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1.5, 2.0], "b": 3, "c": True, "d": 0.5}
    with pytest.raises(TypeError):
        write_json(tmp_path / "z.json", {"s": {1, 2}})
