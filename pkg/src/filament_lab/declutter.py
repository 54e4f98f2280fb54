"""Kernel-density classifier separating filament points from uniform clutter.

A point is kept as filament when the estimated density is at least twice the
clutter density 1/V. The kernel is the 2D biweight (3/pi)(1 - |u|^2)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

BIWEIGHT_NORM = 3.0 / math.pi
MIN_POINTS = 20
REGION_PAD = 0.05


def auto_bandwidth(points) -> float:
    """Rule of thumb n^(-1/6) times the mean marginal standard deviation."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(len(pts) ** (-1.0 / 6.0) * pts.std(axis=0, ddof=1).mean())


def padded_bbox(points, pad: float = REGION_PAD) -> tuple[float, float, float, float]:
    lo, hi = points.min(0), points.max(0)
    m = pad * (hi - lo)
    return float(lo[0] - m[0]), float(lo[1] - m[1]), float(hi[0] + m[0]), float(hi[1] + m[1])


@dataclass(eq=False)
class Declutterer:
    points: np.ndarray
    bandwidth: float
    region: tuple[float, float, float, float]
    _tree: cKDTree = field(repr=False, default=None)
    _grid: object = field(repr=False, default=None)

    @property
    def volume(self) -> float:
        x0, y0, x1, y1 = self.region
        return (x1 - x0) * (y1 - y0)

    @property
    def clutter_density(self) -> float:
        return 1.0 / self.volume

    def density(self, y) -> np.ndarray:
        """m-hat(y) = (1 / n h^2) sum K((y - X_i) / h)."""
        q = np.atleast_2d(np.asarray(y, dtype=float))
        h = self.bandwidth
        if kernels.BACKEND == "cython" and self._grid is None:
            self._grid = kernels.build_point_grid(self.points, h)
        s = kernels.biweight_sums(q, self.points, h, grid=self._grid, tree=self._tree)
        return BIWEIGHT_NORM * s / (len(self.points) * h * h)

    def classify(self, y) -> np.ndarray:
        """True for filament: m-hat(y) >= 2 / V."""
        return self.density(y) >= 2.0 * self.clutter_density


def fit(points, clutter_region=None, bandwidth="auto") -> Declutterer:
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    if len(pts) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points to fit the density")
    if np.all(pts == pts[0]):
        raise ValueError("degenerate input: all points identical")
    h = auto_bandwidth(pts) if bandwidth in (None, "auto") else float(bandwidth)
    if not (h > 0 and math.isfinite(h)):
        raise ValueError("bandwidth must be positive and finite")
    region = padded_bbox(pts) if clutter_region is None else tuple(float(v) for v in clutter_region)
    x0, y0, x1, y1 = region
    if not (x1 > x0 and y1 > y0):
        raise ValueError("clutter region must have positive area")
    return Declutterer(pts, h, region, cKDTree(pts))


def classify(d: Declutterer, y) -> np.ndarray:
    return d.classify(y)
