"""EDT estimator: noise level, ridge point and the near-maximal superlevel region.

Every function here works on a *distance field*: any object exposing
``boundary_distance(points)``, ``contains(points)`` and ``bounds``. Both
:class:`~filament_lab.support.SupportEstimate` (empirical) and
:class:`~filament_lab.model.SupportModel` (truth) qualify.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

REFINE_TOP = 16
PATTERN_TOL = 1e-6
_DIRS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
_DIRS[4:] /= math.sqrt(2.0)


class EdtError(RuntimeError):
    pass


def _epsilon_of(fld) -> float | None:
    return getattr(fld, "epsilon", None)


def interior_edt(fld, points) -> np.ndarray:
    """Lambda-hat restricted to the support: distance to the boundary inside, minus it outside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = fld.boundary_distance(pts)
    return np.where(fld.contains(pts), d, -d)


def grid_points(bounds, step: float) -> tuple[np.ndarray, tuple[float, float], tuple[int, int]]:
    x0, y0, x1, y1 = bounds
    nx = int(math.floor((x1 - x0) / step)) + 1
    ny = int(math.floor((y1 - y0) / step)) + 1
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pts = np.column_stack([x0 + step * ii.ravel(), y0 + step * jj.ravel()])
    return pts, (x0, y0), (nx, ny)


def _pattern_search(fld, starts: np.ndarray, step0: float, tol: float = PATTERN_TOL):
    """Batched compass search maximizing the interior EDT from each start."""
    x = starts.copy()
    val = interior_edt(fld, x)
    step = np.full(len(x), step0)
    active = step > tol
    while np.any(active):
        idx = np.flatnonzero(active)
        cand = x[idx, None, :] + step[idx, None, None] * _DIRS[None, :, :]
        cv = interior_edt(fld, cand.reshape(-1, 2)).reshape(len(idx), len(_DIRS))
        best = np.argmax(cv, axis=1)
        bv = cv[np.arange(len(idx)), best]
        up = bv > val[idx]
        moved = idx[up]
        x[moved] = cand[up, best[up]]
        val[moved] = bv[up]
        shrink = idx[~up]
        step[shrink] *= 0.5
        active = step > tol
    return x, val


def estimate_sigma(fld, seeds=None, grid_step: float | None = None, top: int = REFINE_TOP) -> tuple[float, np.ndarray]:
    """(sigma_hat, y_hat): the maximum of the empirical EDT over the support and where it is attained.

    Starts are the field's seed points (the data, for an estimated support) plus
    a coarse grid; the ``top`` best starts are refined by pattern search to
    step 1e-6.
    """
    x0, y0, x1, y1 = fld.bounds
    if seeds is None:
        seeds = fld.seed_points() if hasattr(fld, "seed_points") else np.zeros((0, 2))
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    if grid_step is None:
        grid_step = max(x1 - x0, y1 - y0) / 64.0
    g, _, _ = grid_points(fld.bounds, grid_step)
    starts = np.vstack([seeds, g])
    vals = interior_edt(fld, starts)
    order = np.lexsort((np.arange(len(vals)), -vals))[: max(1, top)]
    eps = _epsilon_of(fld)
    step0 = 0.25 * (eps if eps else grid_step)
    pts, v = _pattern_search(fld, starts[order], step0)
    k = int(np.argmax(v))
    return float(max(v[k], 0.0)), pts[k]


@dataclass(eq=False)
class EdtEstimate:
    """The region {y in S-hat : Lambda-hat(y) >= sigma_hat - delta} on a grid.

    ``region_index`` holds the integer grid coordinates of ``region_points``;
    ``contains`` re-checks membership of arbitrary points exactly.
    """

    sigma_hat: float
    y_hat: np.ndarray
    delta: float
    epsilon: float
    grid_step: float
    region_points: np.ndarray
    region_index: np.ndarray
    origin: tuple[float, float]
    shape: tuple[int, int]
    fld: object = field(repr=False)

    @property
    def threshold(self) -> float:
        return self.sigma_hat - self.delta

    def edt(self, points) -> np.ndarray:
        return interior_edt(self.fld, points)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.fld.contains(pts)
        out = np.zeros(len(pts), dtype=bool)
        if np.any(inside):
            out[inside] = self.fld.boundary_distance(pts[inside]) >= self.threshold
        return out

    def __len__(self) -> int:
        return len(self.region_points)


def edt_region(fld, delta: float | None = None, grid_step: float | None = None,
               sigma_hat: float | None = None, y_hat=None, epsilon: float | None = None) -> EdtEstimate:
    """Materialize the EDT region on a uniform grid over the support's bounding box.

    Defaults: ``delta = 2 eps`` and ``grid_step = eps / 4`` where ``eps`` is the
    field's ball radius. Exact fields (no ball radius) take ``epsilon`` explicitly.
    """
    eps = _epsilon_of(fld) if epsilon is None else float(epsilon)
    if delta is None or grid_step is None:
        if eps is None:
            raise ValueError("delta and grid_step are required for fields without an epsilon")
    delta = 2.0 * eps if delta is None else float(delta)
    grid_step = 0.25 * eps if grid_step is None else float(grid_step)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if sigma_hat is None:
        sigma_hat, y_hat = estimate_sigma(fld)
    pts, origin, shape = grid_points(fld.bounds, grid_step)
    keep = np.zeros(len(pts), dtype=bool)
    inside = np.flatnonzero(fld.contains(pts))
    if inside.size:
        keep[inside] = fld.boundary_distance(pts[inside]) >= sigma_hat - delta
    if not keep.any():
        raise EdtError("empty EDT region")
    idx = np.flatnonzero(keep)
    ij = np.column_stack([idx // shape[1], idx % shape[1]])
    return EdtEstimate(float(sigma_hat), np.asarray(y_hat, dtype=float), delta,
                       float(eps) if eps is not None else float("nan"), grid_step,
                       pts[keep], ij, origin, shape, fld)


def edt_lipschitz_check(fld, truth, points, boundary_error: float | None = None) -> tuple[float, float]:
    """(max |Lambda-hat - Lambda| over ``points``, measured boundary Hausdorff error).

    Distances to two sets differ by at most their Hausdorff distance, so the
    first value never exceeds the second.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    gap = float(np.max(np.abs(fld.boundary_distance(pts) - truth.boundary_distance(pts))))
    if boundary_error is None:
        from .evaluate import boundary_hausdorff

        boundary_error = boundary_hausdorff(truth, fld)["dh"]
    return gap, float(boundary_error)
