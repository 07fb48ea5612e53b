"""Persisted artifacts: path files, tables, sample dumps and run manifests.

Binary path format (all integers little-endian)::

    8 bytes   magic b"SPDEPTH1"
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header (grid, shape, metadata)
    rest      float64 little-endian snapshots, row-major (n_t + 1, n_y)
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SchemaError
from .fieldpath import FieldPath, PathFlags
from .grid import GridSpec, build_axes
from .noise import substream_description

MAGIC = b"SPDEPTH1"


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_path_bin(path, fp: FieldPath) -> Path:
    path = Path(path)
    header = json.dumps({"grid": fp.spec.to_dict(), "shape": list(fp.snapshots.shape),
                         "dtype": "<f8", "order": "C", "metadata": fp.metadata()},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(fp.snapshots, dtype="<f8").tobytes())
    return path


def read_path_bin(path) -> FieldPath:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise SchemaError("not a path file (bad magic)")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n])
    spec = GridSpec.from_dict(header["grid"])
    shape = tuple(header["shape"])
    body = np.frombuffer(data[12 + n:], dtype="<f8")
    if body.size != shape[0] * shape[1]:
        raise SchemaError("path file is truncated")
    meta = header.get("metadata", {})
    flags = PathFlags(**meta.get("flags", {}))
    return FieldPath(spec, body.reshape(shape).astype(float), meta.get("kernel", "none"),
                     float(meta.get("eps", 0.0)), meta.get("master_seed"), meta.get("replicate_index"),
                     flags, bool(meta.get("centered", False)))


def write_path_csv(path, fp: FieldPath, every: int = 1) -> Path:
    """Long-format (t, y, u) table, one row per node, every ``every``-th snapshot."""
    y, t, _ = build_axes(fp.spec)
    rows = [(repr(float(t[n])), repr(float(y[j])), repr(float(fp.snapshots[n, j])))
            for n in range(0, fp.snapshots.shape[0], every) for j in range(y.size)]
    return write_rows(path, ["t", "y", "u"], rows)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_table(path, records: list[dict], fmt: str) -> Path:
    """List of flat dicts as CSV (column order of the first record) or JSON."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(records, indent=2, sort_keys=True, default=_default) + "\n")
        return path
    header = list(records[0]) if records else []
    return write_rows(path, header, [[_cell(r[k]) for k in header] for r in records])


def write_samples_csv(path, ens) -> Path:
    """Raw samples as (replicate, time, function, value) rows."""
    dt = ens.spec.dt
    rows = [(r, repr(t * dt), ens.fns[i].label(), repr(float(ens.samples[r, k, i])))
            for r in range(ens.n_replicates) for k, t in enumerate(ens.times) for i in range(len(ens.fns))]
    return write_rows(path, ["replicate", "time", "function", "value"], rows)


def _cell(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


@dataclass
class RunManifest:
    command: str
    fingerprint: str
    outputs: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    tool_version: str = __version__
    prng: dict = field(default_factory=substream_description)
    wall_clock: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def add(self, path) -> None:
        p = Path(path)
        self.outputs[p.name] = file_hash(p)

    def write(self, directory) -> Path:
        path = Path(directory) / f"manifest-{self.command}.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=_default) + "\n")
        return path
