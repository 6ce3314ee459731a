"""Binary/CSV field files, measure JSON and report serialization."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
import struct
from pathlib import Path

import numpy as np

from .fields import Grid, RadonMeasure, ScalarField

MAGIC = b"NLPF"
VERSION = 1

# header: magic, version, n | shape (n x u64) | h, origin (n x f64) | mirror (n x u8) | singular count (u64)


def write_field(field: ScalarField, path) -> None:
    """Flat little-endian layout: header, row-major float64 values, singular flat indices."""
    g = field.grid
    sing = np.flatnonzero(field.singular.ravel()).astype("<u8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, g.n))
        fh.write(struct.pack(f"<{g.n}Q", *g.shape))
        fh.write(struct.pack(f"<d{g.n}d", g.h, *g.origin))
        fh.write(struct.pack(f"<{g.n}B", *[int(m) for m in g.mirror]))
        fh.write(struct.pack("<Q", sing.size))
        fh.write(np.ascontiguousarray(field.finite_values(np.nan), dtype="<f8").tobytes())
        fh.write(sing.tobytes())


def read_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a field file")
    off = 4
    version, n = struct.unpack_from("<II", data, off)
    off += 8
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    shape = struct.unpack_from(f"<{n}Q", data, off)
    off += 8 * n
    h, *origin = struct.unpack_from(f"<d{n}d", data, off)
    off += 8 * (n + 1)
    mirror = struct.unpack_from(f"<{n}B", data, off)
    off += n
    (count,) = struct.unpack_from("<Q", data, off)
    off += 8
    size = int(np.prod(shape))
    vals = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
    off += 8 * size
    sing = np.zeros(size, dtype=bool)
    sing[np.frombuffer(data, dtype="<u8", count=count, offset=off).astype(np.int64)] = True
    grid = Grid(n, tuple(shape), h, tuple(origin), tuple(bool(m) for m in mirror))
    return ScalarField(grid, vals, sing.reshape(shape))


def write_field_csv(field: ScalarField, path) -> None:
    g = field.grid
    pts = g.points().reshape(-1, g.n)
    vals = field.finite_values(np.nan).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{k + 1}" for k in range(g.n)] + ["value"])
        for i, (p, v) in enumerate(zip(pts, vals)):
            w.writerow([i] + [repr(float(c)) for c in p] + [repr(float(v))])


def measure_to_json(mu: RadonMeasure, density_ref: str | None = None) -> str:
    atoms = [[*map(float, p), float(m)] for p, m in mu.atoms]
    return json.dumps({"atoms": atoms, "density": density_ref})


def measure_from_json(text: str, base: Path | None = None) -> RadonMeasure:
    obj = json.loads(text)
    atoms = tuple((np.asarray(a[:-1], dtype=float), a[-1]) for a in obj.get("atoms", []))
    dens = None
    ref = obj.get("density")
    if ref:
        p = Path(ref)
        if base is not None and not p.is_absolute():
            p = base / p
        dens = read_field(p)
    return RadonMeasure(atoms, dens)


def jsonable(obj):
    """Convert dataclasses, enums and numpy values for ``json.dumps``; fields and 2-D+ arrays are left out."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, ScalarField) or (isinstance(v, np.ndarray) and v.ndim > 1):
                continue
            out[f.name] = jsonable(v)
        return out
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(rows, header, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
