"""Backend selection for the hot loops.

The compiled extension ``filament_lab._kernels`` is used when importable;
otherwise (or with ``FILAMENT_LAB_PURE=1``) the numpy/scipy fallback in
``_kernels_py`` is used. Both return identical distances.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py

_ext = None
if os.environ.get("FILAMENT_LAB_PURE") != "1":
    try:
        from . import _kernels as _ext
    except ImportError:  # extension not built
        _ext = None

BACKEND = "cython" if _ext is not None else "python"

TWO_PI = 2.0 * np.pi
ARC, SEGMENT = 0, 1


def use_backend(name: str) -> str:
    """Switch backend at runtime ("cython" or "python"); returns the previous one."""
    global BACKEND
    prev = BACKEND
    if name == "cython" and _ext is None:
        raise RuntimeError("compiled kernels are not available")
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return prev


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ext is not None else [])


def element_bboxes(kind: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Tight axis-aligned boxes (xmin, ymin, xmax, ymax) of arcs and segments."""
    n = len(kind)
    box = np.empty((n, 4))
    arc = kind == ARC
    if np.any(arc):
        cx, cy, r, a0, sp = (P[arc, c] for c in range(5))
        xs = [cx + r * np.cos(a0), cx + r * np.cos(a0 + sp)]
        ys = [cy + r * np.sin(a0), cy + r * np.sin(a0 + sp)]
        for ang in (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi):
            hit = np.mod(ang - a0, TWO_PI) <= sp
            xs.append(np.where(hit, cx + r * np.cos(ang), np.nan))
            ys.append(np.where(hit, cy + r * np.sin(ang), np.nan))
        xs = np.vstack(xs)
        ys = np.vstack(ys)
        box[arc] = np.column_stack([np.nanmin(xs, 0), np.nanmin(ys, 0), np.nanmax(xs, 0), np.nanmax(ys, 0)])
    seg = ~arc
    if np.any(seg):
        x0, y0, x1, y1 = (P[seg, c] for c in range(4))
        box[seg] = np.column_stack([np.minimum(x0, x1), np.minimum(y0, y1), np.maximum(x0, x1), np.maximum(y0, y1)])
    return box


def element_midpoints(kind: np.ndarray, P: np.ndarray) -> np.ndarray:
    mid = np.empty((len(kind), 2))
    arc = kind == ARC
    a = P[arc, 3] + 0.5 * P[arc, 4]
    mid[arc, 0] = P[arc, 0] + P[arc, 2] * np.cos(a)
    mid[arc, 1] = P[arc, 1] + P[arc, 2] * np.sin(a)
    seg = ~arc
    mid[seg, 0] = 0.5 * (P[seg, 0] + P[seg, 2])
    mid[seg, 1] = 0.5 * (P[seg, 1] + P[seg, 3])
    return mid


@dataclass
class ElementGrid:
    """Uniform bucket grid over element bounding boxes."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int
    cell_start: np.ndarray
    cell_items: np.ndarray
    bbox: np.ndarray
    anchors: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)


def _bucket(lo_i, hi_i, lo_j, hi_j, ny, ncell):
    ni = hi_i - lo_i + 1
    nj = hi_j - lo_j + 1
    counts = ni * nj
    owner = np.repeat(np.arange(len(ni)), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    ii = lo_i[owner] + offs // nj[owner]
    jj = lo_j[owner] + offs % nj[owner]
    cells = ii * ny + jj
    order = np.argsort(cells, kind="stable")
    items = owner[order].astype(np.int64)
    start = np.zeros(ncell + 1, dtype=np.int64)
    np.add.at(start, cells + 1, 1)
    return np.cumsum(start), items


def build_element_grid(kind: np.ndarray, P: np.ndarray, cell: float | None = None, max_cells: int = 1024) -> ElementGrid:
    box = element_bboxes(kind, P)
    xmin, ymin = box[:, 0].min(), box[:, 1].min()
    xmax, ymax = box[:, 2].max(), box[:, 3].max()
    extent = max(xmax - xmin, ymax - ymin, 1e-12)
    if cell is None:
        sizes = np.maximum(box[:, 2] - box[:, 0], box[:, 3] - box[:, 1])
        cell = float(np.median(sizes))
    h = float(np.clip(cell, extent / max_cells, extent))
    nx = int(np.floor((xmax - xmin) / h)) + 1
    ny = int(np.floor((ymax - ymin) / h)) + 1
    lo_i = np.clip(np.floor((box[:, 0] - xmin) / h).astype(np.int64), 0, nx - 1)
    hi_i = np.clip(np.floor((box[:, 2] - xmin) / h).astype(np.int64), 0, nx - 1)
    lo_j = np.clip(np.floor((box[:, 1] - ymin) / h).astype(np.int64), 0, ny - 1)
    hi_j = np.clip(np.floor((box[:, 3] - ymin) / h).astype(np.int64), 0, ny - 1)
    start, items = _bucket(lo_i, hi_i, lo_j, hi_j, ny, nx * ny)
    return ElementGrid(float(xmin), float(ymin), h, nx, ny, start, items, box, element_midpoints(kind, P))


def nearest_on_elements(Q, kind, P, grid: ElementGrid):
    """Exact nearest point on a set of arcs/segments for every query row.

    Returns (distance, element index, nearest point).
    """
    Q = np.ascontiguousarray(np.atleast_2d(np.asarray(Q, dtype=float)))
    kind = np.ascontiguousarray(kind, dtype=np.int64)
    P = np.ascontiguousarray(P, dtype=float)
    if BACKEND == "cython":
        return _ext.nearest_on_elements(Q, kind, P, grid.x0, grid.y0, grid.h, grid.nx, grid.ny,
                                        grid.cell_start, grid.cell_items)
    return _kernels_py.nearest_on_elements(Q, kind, P, grid)


def uncovered_arcs(centers, eps, balls, ptr, nbr, starts, ends, tol=1e-9):
    """Uncovered angular spans of each ball given its sorted cover intervals.

    Returns (ball, start, span, start_neighbor, end_neighbor); neighbors are -1
    for a full uncovered circle.
    """
    args = (
        np.ascontiguousarray(centers, dtype=float), float(eps),
        np.ascontiguousarray(balls, dtype=np.int64), np.ascontiguousarray(ptr, dtype=np.int64),
        np.ascontiguousarray(nbr, dtype=np.int64), np.ascontiguousarray(starts, dtype=float),
        np.ascontiguousarray(ends, dtype=float), float(tol),
    )
    if BACKEND == "cython":
        return _ext.uncovered_arcs(*args)
    return _kernels_py.uncovered_arcs(*args)


@dataclass
class PointGrid:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int
    cell_start: np.ndarray
    cell_items: np.ndarray


def build_point_grid(X: np.ndarray, h: float) -> PointGrid:
    xmin, ymin = X.min(axis=0)
    xmax, ymax = X.max(axis=0)
    nx = int(np.floor((xmax - xmin) / h)) + 1
    ny = int(np.floor((ymax - ymin) / h)) + 1
    if nx * ny > 4_000_000:
        raise ValueError("bandwidth too small for grid pruning")
    ci = np.clip(np.floor((X[:, 0] - xmin) / h).astype(np.int64), 0, nx - 1)
    cj = np.clip(np.floor((X[:, 1] - ymin) / h).astype(np.int64), 0, ny - 1)
    start, items = _bucket(ci, ci, cj, cj, ny, nx * ny)
    return PointGrid(float(xmin), float(ymin), float(h), nx, ny, start, items)


def biweight_sums(Q, X, h: float, grid: PointGrid | None = None, tree=None) -> np.ndarray:
    """Sum over data points of (1 - |q - x|^2 / h^2)^2 within radius h."""
    Q = np.ascontiguousarray(np.atleast_2d(np.asarray(Q, dtype=float)))
    X = np.ascontiguousarray(X, dtype=float)
    if BACKEND == "cython":
        if grid is None:
            grid = build_point_grid(X, h)
        return _ext.biweight_kde(Q, X, float(h), grid.x0, grid.y0, grid.nx, grid.ny,
                                 grid.cell_start, grid.cell_items)
    return _kernels_py.biweight_kde(Q, X, float(h), tree=tree)
