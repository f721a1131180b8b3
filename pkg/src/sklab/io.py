"""CSV/JSON serialization of fields, configs and reports.

Floats are written with ``repr`` (shortest round-trip form), so files are
byte-identical across runs with identical inputs.  Every CSV field file has
a JSON sidecar ``<file>.json`` describing the grid.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .field_core import AnnulusGrid, ComplexField, OneForm, ScalarField

SCHEMA_VERSION = 1

_COLUMNS = {
    "scalar": ("value",),
    "one_form": ("p", "q"),
    "complex": ("re", "im"),
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, 2-space indent, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config) -> str:
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def _fmt(v):
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


def write_field(path, field, meta=None):
    """Write a field as CSV plus its JSON sidecar; returns the sidecar path."""
    path = Path(path)
    if isinstance(field, ScalarField):
        kind, comps = "scalar", (field.values,)
    elif isinstance(field, OneForm):
        kind, comps = "one_form", (field.p, field.q)
    elif isinstance(field, ComplexField):
        kind, comps = "complex", (field.re, field.im)
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    g = field.grid
    header = ["i_radial", "i_angular", "r", "theta", *_COLUMNS[kind]]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for i in range(g.n_radial):
            for j in range(g.n_angular):
                wr.writerow([i, j, _fmt(g.r[i]), _fmt(g.theta[j]), *(_fmt(c[i, j]) for c in comps)])
    side = Path(str(path) + ".json")
    info = {"schema_version": SCHEMA_VERSION, "kind": kind, "columns": header, "grid": g.to_dict()}
    if meta:
        info.update(meta)
    write_json(side, info)
    return side


def read_field(path):
    """Read a field written by :func:`write_field` (needs the sidecar)."""
    path = Path(path)
    side = Path(str(path) + ".json")
    info = json.loads(side.read_text())
    grid = AnnulusGrid.from_dict(info["grid"])
    kind = info["kind"]
    if kind not in _COLUMNS:
        raise ValueError(f"unknown field kind {kind!r}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != info["columns"]:
        raise ValueError("CSV header does not match its sidecar")
    data = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    if data.shape != (grid.n_radial * grid.n_angular, len(info["columns"])):
        raise ValueError("CSV row count does not match the grid")
    comps = [data[:, 4 + k].reshape(grid.shape) for k in range(len(_COLUMNS[kind]))]
    if kind == "scalar":
        return ScalarField(grid, comps[0])
    if kind == "one_form":
        return OneForm(grid, *comps)
    return ComplexField(grid, *comps)
