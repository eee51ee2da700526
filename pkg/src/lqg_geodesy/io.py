"""Flat-file formats: ``.fgrid`` field snapshots, ``.dfield`` distance dumps, CSV/JSON outputs.

Both binary formats are one JSON header line followed by raw little-endian
arrays in row-major order.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .field import FieldGrid, GridSpec
from .metric import NO_PRED, MetricField

PathLike = Union[str, Path]
_F64 = np.dtype("<f8")
_U32 = np.dtype("<u4")
_U32_NONE = np.iinfo(np.uint32).max


def _read_header(fh) -> Dict[str, Any]:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise ValueError("missing header line")
    return json.loads(line.decode("utf-8"))


def _header_bytes(header: Dict[str, Any]) -> bytes:
    return (json.dumps(header, sort_keys=True) + "\n").encode("utf-8")


def write_fgrid(path: PathLike, field: FieldGrid) -> Path:
    path = Path(path)
    spec = field.spec
    header = {
        "side_count": spec.side_count,
        "mesh": spec.mesh,
        "origin_offset": list(spec.origin_offset),
        "seed": field.seed,
        "provenance": field.provenance,
        "normalization": field.normalization,
    }
    if field.epsilon is not None:
        header["epsilon"] = field.epsilon
    with open(path, "wb") as fh:
        fh.write(_header_bytes(header))
        fh.write(np.ascontiguousarray(field.values, dtype=_F64).tobytes())
    return path


def read_fgrid(path: PathLike) -> FieldGrid:
    with open(path, "rb") as fh:
        h = _read_header(fh)
        n = int(h["side_count"])
        vals = np.frombuffer(fh.read(), dtype=_F64)
    if vals.size != n * n:
        raise ValueError(f"expected {n * n} values, found {vals.size}")
    spec = GridSpec(n, float(h["mesh"]), tuple(h["origin_offset"]))
    return FieldGrid(spec, vals.reshape(n, n).astype(np.float64), h["normalization"], int(h["seed"]),
                     h["provenance"], h.get("epsilon"))


def write_dfield(path: PathLike, mf: MetricField, extra: Dict[str, Any] = None) -> Path:
    path = Path(path)
    header = {"source": mf.source, "shape": list(mf.shape), "no_predecessor": _U32_NONE}
    header.update(extra or {})
    pred = mf.predecessors.astype(np.int64)
    pred = np.where(pred == NO_PRED, _U32_NONE, pred).astype(_U32)
    with open(path, "wb") as fh:
        fh.write(_header_bytes(header))
        fh.write(np.ascontiguousarray(mf.distances, dtype=_F64).tobytes())
        fh.write(pred.tobytes())
    return path


def read_dfield(path: PathLike) -> Tuple[MetricField, Dict[str, Any]]:
    with open(path, "rb") as fh:
        h = _read_header(fh)
        shape = tuple(int(s) for s in h["shape"])
        size = shape[0] * shape[1]
        dist = np.frombuffer(fh.read(8 * size), dtype=_F64).astype(np.float64)
        pred = np.frombuffer(fh.read(4 * size), dtype=_U32).astype(np.int64)
    if dist.size != size or pred.size != size:
        raise ValueError("truncated .dfield file")
    pred[pred == _U32_NONE] = NO_PRED
    return MetricField(int(h["source"]), dist, pred, shape), h


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(x: Any) -> Any:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (bool, np.bool_)):
        return int(bool(x))
    return x


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o: Any) -> Any:
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


CENSUS_COLUMNS = ("seed", "z_x", "z_y", "w_x", "w_y", "d", "k", "n", "m", "normal", "splitter_x", "splitter_y")
ESTIMATE_COLUMNS = ("scale", "value")
