"""CSV and JSON files. Floats are written with 17 significant digits so they round-trip."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return fmt(v) if isinstance(v, (float, np.floating)) else v


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def write_points(path, points, labels=None, extra: dict | None = None) -> Path:
    """``x,y,label`` rows, plus any extra named columns."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    labels = np.zeros(len(pts), dtype=np.int64) if labels is None else np.asarray(labels)
    extra = extra or {}
    header = ["x", "y", "label", *extra]
    cols = [np.asarray(v) for v in extra.values()]
    rows = ([float(p[0]), float(p[1]), int(l), *(c[i].item() for c in cols)] for i, (p, l) in enumerate(zip(pts, labels)))
    return write_rows(path, header, rows)


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [row for row in r if row]
    cols = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in data]
        try:
            cols[name] = np.array([int(v) for v in vals], dtype=np.int64)
        except ValueError:
            cols[name] = np.array([float(v) for v in vals])
    return cols


def read_points(path) -> tuple[np.ndarray, np.ndarray]:
    t = read_table(path)
    if "x" not in t or "y" not in t:
        raise ValueError(f"{path}: expected columns x,y")
    pts = np.column_stack([t["x"].astype(float), t["y"].astype(float)])
    labels = t.get("label", np.zeros(len(pts), dtype=np.int64))
    return pts, labels


def write_curve(path, vertices, closed: bool | None = None) -> Path:
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    return write_rows(path, ["x", "y"], ([float(a), float(b)] for a, b in v))


def read_curve(path) -> np.ndarray:
    t = read_table(path)
    return np.column_stack([t["x"].astype(float), t["y"].astype(float)])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else None
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
