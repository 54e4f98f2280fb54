"""Planar primitives: arcs, segments, polylines, angular intervals, distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from ._kernels_py import pair_nearest
from .kernels import ARC, SEGMENT

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or invalid geometric input."""


def normalize_angle(a):
    """Map angles to [0, 2pi)."""
    r = np.mod(a, TWO_PI)
    return np.where(r >= TWO_PI, 0.0, r) if isinstance(r, np.ndarray) else (0.0 if r >= TWO_PI else float(r))


@dataclass(frozen=True)
class Arc:
    """Circular arc traversed counter-clockwise from ``start_angle`` to ``end_angle``."""

    center: tuple[float, float]
    radius: float
    start_angle: float
    end_angle: float
    full_circle: bool = False

    def __post_init__(self):
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise GeometryError(f"arc radius must be positive, got {self.radius}")
        if not all(math.isfinite(c) for c in self.center):
            raise GeometryError("arc center must be finite")
        object.__setattr__(self, "start_angle", normalize_angle(self.start_angle))
        object.__setattr__(self, "end_angle", normalize_angle(self.end_angle))
        if not self.full_circle and self.span <= 0:
            raise GeometryError("arc span must be positive")

    @property
    def span(self) -> float:
        if self.full_circle:
            return TWO_PI
        s = normalize_angle(self.end_angle - self.start_angle)
        return s

    @property
    def length(self) -> float:
        return self.radius * self.span

    def point_at(self, angle: float) -> tuple[float, float]:
        return (self.center[0] + self.radius * math.cos(angle), self.center[1] + self.radius * math.sin(angle))

    @property
    def start_point(self) -> tuple[float, float]:
        return self.point_at(self.start_angle)

    @property
    def end_point(self) -> tuple[float, float]:
        return self.point_at(self.start_angle + self.span)

    def sample(self, spacing: float) -> np.ndarray:
        k = max(2, int(math.ceil(self.length / spacing)) + 1)
        t = self.start_angle + np.linspace(0.0, self.span, k)
        return np.column_stack([self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)])

    def as_row(self) -> list[float]:
        return [self.center[0], self.center[1], self.radius, self.start_angle, self.span]


@dataclass(frozen=True)
class Polyline:
    """Ordered vertex list; a closed polyline has an implicit closing edge."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise GeometryError("polyline needs at least 2 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polyline vertices must be finite")
        if self.closed and np.array_equal(v[0], v[-1]):
            raise GeometryError("closed polyline must not repeat its first vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    @property
    def length(self) -> float:
        a, b = self.edges()
        return float(np.hypot(*(b - a).T).sum())

    def sample(self, spacing: float) -> np.ndarray:
        """Points along the polyline no farther than ``spacing`` apart (vertices included)."""
        a, b = self.edges()
        seg_len = np.hypot(*(b - a).T)
        k = np.maximum(1, np.ceil(seg_len / spacing).astype(int))
        owner = np.repeat(np.arange(len(a)), k)
        t = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
        pts = a[owner] + t[:, None] * (b - a)[owner]
        if not self.closed:
            pts = np.vstack([pts, self.vertices[-1]])
        return pts

    def distance(self, points) -> np.ndarray:
        a, b = self.edges()
        es = ElementSet.from_segments(a, b)
        return es.nearest(points)[0]


def point_to_segment_distance(p, a, b) -> float:
    d, _, _ = pair_nearest(np.array([p[0]]), np.array([p[1]]), np.array([SEGMENT]), np.array([[a[0], a[1], b[0], b[1], 0.0]]))
    return float(d[0])


def point_to_arc_distance(p, arc: Arc) -> float:
    """Exact Euclidean distance from ``p`` to the arc point set."""
    d, _, _ = pair_nearest(np.array([float(p[0])]), np.array([float(p[1])]), np.array([ARC]), np.array([arc.as_row()]))
    return float(d[0])


# -- angular intervals -------------------------------------------------------


@dataclass(frozen=True)
class AngularIntervalSet:
    """Disjoint counter-clockwise intervals on the circle, as (start, length) pairs.

    Starts lie in [0, 2pi); an interval may wrap past 2pi. Endpoints closer than
    ``ANGLE_TOL`` are merged.
    """

    intervals: tuple[tuple[float, float], ...] = ()

    @classmethod
    def from_intervals(cls, pairs: Sequence[tuple[float, float]], tol: float = ANGLE_TOL) -> "AngularIntervalSet":
        """Normalized union of (start, length) pairs."""
        items = [(normalize_angle(s), float(L)) for s, L in pairs if L > 0]
        if not items:
            return cls(())
        if any(L >= TWO_PI - tol for _, L in items):
            return cls(((0.0, TWO_PI),))
        items.sort()
        merged: list[list[float]] = []
        for s, L in items:
            e = s + L
            if merged and s <= merged[-1][1] + tol:
                merged[-1][1] = max(merged[-1][1], e)
            else:
                merged.append([s, e])
        while len(merged) > 1 and merged[-1][1] - TWO_PI >= merged[0][0] - tol:
            first = merged.pop(0)
            merged[-1][1] = max(merged[-1][1], first[1] + TWO_PI)
        if merged[-1][1] - merged[-1][0] >= TWO_PI - tol:
            return cls(((0.0, TWO_PI),))
        return cls(tuple((s, e - s) for s, e in merged))

    @property
    def measure(self) -> float:
        return float(sum(L for _, L in self.intervals))

    @property
    def is_full(self) -> bool:
        return len(self.intervals) == 1 and self.intervals[0][1] >= TWO_PI - ANGLE_TOL

    def contains(self, theta) -> np.ndarray:
        theta = np.atleast_1d(normalize_angle(np.asarray(theta, dtype=float)))
        hit = np.zeros(theta.shape, dtype=bool)
        for s, L in self.intervals:
            hit |= np.mod(theta - s, TWO_PI) <= L
        return hit

    def union(self, other: "AngularIntervalSet") -> "AngularIntervalSet":
        return AngularIntervalSet.from_intervals(list(self.intervals) + list(other.intervals))

    def complement(self, tol: float = ANGLE_TOL) -> "AngularIntervalSet":
        if not self.intervals:
            return AngularIntervalSet(((0.0, TWO_PI),))
        if self.is_full:
            return AngularIntervalSet(())
        out = []
        iv = self.intervals
        for k, (s, L) in enumerate(iv):
            nxt = iv[(k + 1) % len(iv)][0] + (TWO_PI if k + 1 == len(iv) else 0.0)
            gap = nxt - (s + L)
            if gap > tol:
                out.append((normalize_angle(s + L), gap))
        return AngularIntervalSet(tuple(sorted(out)))


def subtract_angular_cover(cover: AngularIntervalSet | Sequence[tuple[float, float]]) -> AngularIntervalSet:
    """Uncovered part of a circle; an empty result means the circle is fully covered."""
    if not isinstance(cover, AngularIntervalSet):
        cover = AngularIntervalSet.from_intervals(cover)
    return cover.complement()


# -- point-set distances -----------------------------------------------------


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and a.size == 2:
        a = a[None, :]
    if a.size == 0:
        raise GeometryError("empty set")
    return a.reshape(-1, 2)


def directed_hausdorff(a, b) -> float:
    """sup over a of the distance to the nearest point of b."""
    a = _as_points(a)
    b = _as_points(b)
    d, _ = cKDTree(b).query(a)
    return float(d.max())


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


# -- polylines ---------------------------------------------------------------


def winding_number(curve: Polyline, p, tol: float = 1e-12) -> int:
    """Winding number of a closed polyline around ``p`` by summed subtended angles."""
    v = np.asarray(curve.vertices, dtype=float) - np.asarray(p, dtype=float)
    w = np.roll(v, -1, axis=0)
    if curve.distance(np.asarray(p, dtype=float)[None, :])[0] <= tol:
        raise GeometryError("degenerate query")
    cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    dot = (v * w).sum(axis=1)
    total = np.arctan2(cross, dot).sum()
    return int(round(total / TWO_PI))


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Vectorized closed-segment intersection test for aligned segment arrays."""
    p1, p2, q1, q2 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p1, p2, q1, q2))
    d1 = _orient(*q1.T, *q2.T, *p1.T)
    d2 = _orient(*q1.T, *q2.T, *p2.T)
    d3 = _orient(*p1.T, *p2.T, *q1.T)
    d4 = _orient(*p1.T, *p2.T, *q2.T)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_seg(a, b, c, d):
        return (d == 0) & (np.minimum(a[:, 0], b[:, 0]) <= c[:, 0]) & (c[:, 0] <= np.maximum(a[:, 0], b[:, 0])) & (
            np.minimum(a[:, 1], b[:, 1]) <= c[:, 1]) & (c[:, 1] <= np.maximum(a[:, 1], b[:, 1]))

    touch = on_seg(q1, q2, p1, d1) | on_seg(q1, q2, p2, d2) | on_seg(p1, p2, q1, d3) | on_seg(p1, p2, q2, d4)
    return proper | touch


def polyline_is_simple(curve: Polyline) -> bool:
    """True when no two non-adjacent edges intersect (grid-bucketed sweep)."""
    a, b = curve.edges()
    m = len(a)
    if m < 3:
        return True
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    seg_len = np.hypot(*(b - a).T)
    if np.any(seg_len == 0):
        return False
    h = max(float(np.median(seg_len)) * 2.0, 1e-12)
    origin = lo.min(axis=0)
    i0 = np.floor((lo - origin) / h).astype(np.int64)
    i1 = np.floor((hi - origin) / h).astype(np.int64)
    ny = int(i1[:, 1].max()) + 1
    counts = (i1[:, 0] - i0[:, 0] + 1) * (i1[:, 1] - i0[:, 1] + 1)
    owner = np.repeat(np.arange(m), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    nj = (i1[:, 1] - i0[:, 1] + 1)[owner]
    cell = (i0[owner, 0] + offs // nj) * ny + (i0[owner, 1] + offs % nj)
    order = np.lexsort((owner, cell))
    cell, owner = cell[order], owner[order]
    bounds = np.flatnonzero(np.diff(cell)) + 1
    pairs = []
    for grp in np.split(owner, bounds):
        if len(grp) > 1:
            ii, jj = np.triu_indices(len(grp), 1)
            pairs.append(np.column_stack([grp[ii], grp[jj]]))
    if not pairs:
        return True
    pr = np.unique(np.sort(np.vstack(pairs), axis=1), axis=0)
    gap = pr[:, 1] - pr[:, 0]
    adjacent = (gap == 1) | (curve.closed & (gap == m - 1))
    pr = pr[~adjacent]
    if len(pr) == 0:
        return True
    return not bool(np.any(segments_intersect(a[pr[:, 0]], b[pr[:, 0]], a[pr[:, 1]], b[pr[:, 1]])))


def polyline_distance_oracle(points, vertices, closed) -> np.ndarray:
    """Brute-force point-to-polyline distance (used for checks)."""
    pts = _as_points(points)
    v = np.asarray(vertices, dtype=float)
    a = v if closed else v[:-1]
    b = np.roll(v, -1, axis=0) if closed else v[1:]
    ab = b - a
    L2 = np.maximum((ab * ab).sum(1), 1e-300)
    t = np.clip(((pts[:, None, :] - a[None]) * ab[None]).sum(-1) / L2, 0, 1)
    proj = a[None] + t[..., None] * ab[None]
    return np.hypot(*(pts[:, None, :] - proj).transpose(2, 0, 1)).min(axis=1)


# -- element sets ------------------------------------------------------------


@dataclass
class ElementSet:
    """Arcs and segments stored row-wise for vectorized queries.

    ``params`` rows are ``(cx, cy, r, start, span)`` for arcs and
    ``(x0, y0, x1, y1, 0)`` for segments.
    """

    kind: np.ndarray
    params: np.ndarray
    _grid: kernels.ElementGrid | None = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = np.ascontiguousarray(self.kind, dtype=np.int64)
        self.params = np.ascontiguousarray(np.asarray(self.params, dtype=float).reshape(-1, 5))

    def __len__(self) -> int:
        return len(self.kind)

    @classmethod
    def from_segments(cls, a, b) -> "ElementSet":
        a = np.asarray(a, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1, 2)
        P = np.column_stack([a, b, np.zeros(len(a))])
        return cls(np.full(len(a), SEGMENT), P)

    @classmethod
    def from_arcs(cls, rows) -> "ElementSet":
        P = np.asarray(rows, dtype=float).reshape(-1, 5)
        return cls(np.full(len(P), ARC), P)

    @classmethod
    def concat(cls, parts: Sequence["ElementSet"]) -> "ElementSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 5)))
        return cls(np.concatenate([p.kind for p in parts]), np.vstack([p.params for p in parts]))

    def subset(self, idx) -> "ElementSet":
        idx = np.asarray(idx, dtype=np.int64)
        return ElementSet(self.kind[idx], self.params[idx])

    @property
    def lengths(self) -> np.ndarray:
        P = self.params
        arc = self.kind == ARC
        return np.where(arc, P[:, 2] * P[:, 4], np.hypot(P[:, 2] - P[:, 0], P[:, 3] - P[:, 1]))

    def start_points(self) -> np.ndarray:
        return self.point_at(np.arange(len(self)), np.zeros(len(self)))

    def end_points(self) -> np.ndarray:
        return self.point_at(np.arange(len(self)), self.lengths)

    def point_at(self, idx, s) -> np.ndarray:
        """Point at arclength ``s`` along element ``idx`` (both arrays)."""
        idx = np.asarray(idx, dtype=np.int64)
        s = np.asarray(s, dtype=float)
        P = self.params[idx]
        arc = self.kind[idx] == ARC
        out = np.empty((len(idx), 2))
        ang = P[:, 3] + s / np.where(arc, P[:, 2], 1.0)
        L = np.hypot(P[:, 2] - P[:, 0], P[:, 3] - P[:, 1])
        t = s / np.where(L > 0, L, 1.0)
        out[:, 0] = np.where(arc, P[:, 0] + P[:, 2] * np.cos(ang), P[:, 0] + t * (P[:, 2] - P[:, 0]))
        out[:, 1] = np.where(arc, P[:, 1] + P[:, 2] * np.sin(ang), P[:, 1] + t * (P[:, 3] - P[:, 1]))
        return out

    def tangent_at(self, idx, s) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        P = self.params[idx]
        arc = self.kind[idx] == ARC
        ang = P[:, 3] + np.asarray(s, dtype=float) / np.where(arc, P[:, 2], 1.0)
        d = np.column_stack([P[:, 2] - P[:, 0], P[:, 3] - P[:, 1]])
        d /= np.maximum(np.hypot(*d.T), 1e-300)[:, None]
        return np.where(arc[:, None], np.column_stack([-np.sin(ang), np.cos(ang)]), d)

    def sample(self, spacing: float, include_end: bool = True) -> np.ndarray:
        """Points along each element at most ``spacing`` apart, elements in order."""
        L = self.lengths
        k = np.maximum(1, np.ceil(L / spacing).astype(int))
        owner = np.repeat(np.arange(len(self)), k)
        frac = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
        pts = self.point_at(owner, frac * L[owner])
        if include_end:
            pts = np.vstack([pts, self.end_points()])
        return pts

    @property
    def grid(self) -> kernels.ElementGrid:
        if self._grid is None:
            self._grid = kernels.build_element_grid(self.kind, self.params)
        return self._grid

    def nearest(self, points):
        """Exact (distance, element index, nearest point) for each query point."""
        if len(self) == 0:
            raise GeometryError("empty element set")
        return kernels.nearest_on_elements(_as_points(points), self.kind, self.params, self.grid)

    def distance(self, points) -> np.ndarray:
        return self.nearest(points)[0]

    def signed_area(self) -> float:
        """Signed area enclosed when the elements form one closed chain in order."""
        P = self.params
        arc = self.kind == ARC
        total = 0.0
        if np.any(arc):
            cx, cy, r, a0, sp = (P[arc, c] for c in range(5))
            a1 = a0 + sp
            total += float(np.sum(r * cx * (np.sin(a1) - np.sin(a0)) - r * cy * (np.cos(a1) - np.cos(a0)) + r * r * sp))
        seg = ~arc
        if np.any(seg):
            x0, y0, x1, y1 = (P[seg, c] for c in range(4))
            total += float(np.sum(x0 * y1 - x1 * y0))
        return 0.5 * total

    def turning(self) -> float:
        """Total signed turning of a closed chain: curvature integral plus corner angles."""
        n = len(self)
        arc = self.kind == ARC
        total = float(np.sum(self.params[arc, 4]))
        t_end = self.tangent_at(np.arange(n), self.lengths)
        t_start = self.tangent_at(np.roll(np.arange(n), -1), np.zeros(n))
        cross = t_end[:, 0] * t_start[:, 1] - t_end[:, 1] * t_start[:, 0]
        dot = (t_end * t_start).sum(1)
        return total + float(np.arctan2(cross, dot).sum())

    def to_rows(self) -> list[dict]:
        rows = []
        for k, p in zip(self.kind, self.params):
            if k == ARC:
                rows.append({"type": "arc", "center": [p[0], p[1]], "radius": p[2], "start": p[3], "span": p[4]})
            else:
                rows.append({"type": "segment", "start": [p[0], p[1]], "end": [p[2], p[3]]})
        return rows


def arc_crossings(es: ElementSet, points) -> np.ndarray:
    """Winding number of a closed element chain around each point (exact ray casting)."""
    pts = _as_points(points)
    w = np.zeros(len(pts), dtype=np.int64)
    P = es.params
    for k, p in zip(es.kind, P):
        if k == SEGMENT:
            x0, y0, x1, y1 = p[:4]
            up = (y0 <= pts[:, 1]) & (y1 > pts[:, 1])
            down = (y1 <= pts[:, 1]) & (y0 > pts[:, 1])
            side = _orient(x0, y0, x1, y1, pts[:, 0], pts[:, 1])
            w += (up & (side > 0)).astype(np.int64) - (down & (side < 0)).astype(np.int64)
        else:
            cx, cy, r, a0, sp = p
            dy = pts[:, 1] - cy
            ok = np.abs(dy) < r
            dx = np.sqrt(np.maximum(r * r - dy * dy, 0.0))
            for sgn in (1.0, -1.0):
                xh = cx + sgn * dx
                ang = np.arctan2(dy, sgn * dx)
                inspan = np.mod(ang - a0, TWO_PI) < sp
                hit = ok & inspan & (xh > pts[:, 0])
                # CCW traversal moves up on the right half (sgn=+1), down on the left
                w += np.where(hit, 1 if sgn > 0 else -1, 0)
    return w
