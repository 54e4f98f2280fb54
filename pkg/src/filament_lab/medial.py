"""Medial estimator: split the estimated boundary in two sides, join them by midpoints.

The closed case uses the two loops of the arrangement directly. For an open
filament the single boundary loop is cut at the two end caps: the boundary
inside B(x_i, sigma_hat + c eps) is extended to the shortest stretch of the
loop containing it and removed, which leaves the two long sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import ARC, TWO_PI, ElementSet, GeometryError, Polyline, polyline_is_simple

DEFAULT_C = 17.0
BREAK_FACTOR = 3.0


class SplitError(RuntimeError):
    pass


@dataclass(eq=False)
class SplitBoundary:
    side0: ElementSet
    side1: ElementSet
    closed: bool
    provenance: str
    cut_sets: list = field(default_factory=list)
    cap_pieces: list = field(default_factory=list)


def split_closed(arrangement) -> SplitBoundary:
    """Outer loop becomes side0 and the hole becomes side1."""
    if arrangement.n_loops != 2:
        raise SplitError(f"not a closed-tube topology: {arrangement.n_loops} boundary loops")
    areas = [abs(arrangement.loop_elements(k).signed_area()) for k in range(2)]
    outer = int(np.argmax(areas))
    probe = arrangement.loop_elements(1 - outer).start_points()[:1]
    if arrangement.loop_winding(outer, probe)[0] == 0:
        raise SplitError("not a closed-tube topology: loops are not nested")
    return SplitBoundary(arrangement.loop_elements(outer), arrangement.loop_elements(1 - outer), True, "closed-native")


# -- loop intervals -------------------------------------------------------------


def _clip_circular(lo: float, hi: float, span: float) -> list[tuple[float, float]]:
    """Intersect the angular interval [lo, hi] (relative to an arc start) with [0, span]."""
    out = []
    width = hi - lo
    if width >= TWO_PI:
        return [(0.0, span)]
    s = lo % TWO_PI
    for shift in (0.0, -TWO_PI):
        a, b = max(s + shift, 0.0), min(s + shift + width, span)
        if b > a:
            out.append((a, b))
    return out


def _inside_ball(es: ElementSet, center, radius: float) -> list[list[tuple[float, float]]]:
    """Per element, arclength sub-intervals lying inside the disk."""
    cx, cy = center
    out = []
    for k, p in zip(es.kind, es.params):
        if k == ARC:
            x, y, r, a0, sp = p
            d = math.hypot(cx - x, cy - y)
            if d + r <= radius:
                out.append([(0.0, r * sp)])
                continue
            if d >= r + radius or d + radius <= r:
                out.append([])
                continue
            th = math.atan2(cy - y, cx - x)
            w = math.acos(max(-1.0, min(1.0, (r * r + d * d - radius * radius) / (2 * r * d))))
            out.append([(r * a, r * b) for a, b in _clip_circular(th - w - a0, th + w - a0, sp)])
        else:
            x0, y0, x1, y1 = p[:4]
            dx, dy = x1 - x0, y1 - y0
            L = math.hypot(dx, dy)
            fx, fy = x0 - cx, y0 - cy
            A = dx * dx + dy * dy
            B = 2 * (fx * dx + fy * dy)
            C = fx * fx + fy * fy - radius * radius
            disc = B * B - 4 * A * C
            if A == 0 or disc <= 0:
                out.append([])
                continue
            sq = math.sqrt(disc)
            t0, t1 = max((-B - sq) / (2 * A), 0.0), min((-B + sq) / (2 * A), 1.0)
            out.append([(t0 * L, t1 * L)] if t1 > t0 else [])
    return out


def _loop_intervals(es: ElementSet, center, radius: float) -> list[tuple[float, float]]:
    offs = np.concatenate([[0.0], np.cumsum(es.lengths)])
    ivs = []
    for i, parts in enumerate(_inside_ball(es, center, radius)):
        ivs.extend((offs[i] + a, offs[i] + b) for a, b in parts)
    return ivs


def _completion(ivs: list[tuple[float, float]], L: float, tol: float) -> tuple[float, float] | None:
    """Shortest loop stretch (start, length) containing every interval: the complement of the widest gap."""
    if not ivs:
        return None
    ivs = sorted(ivs)
    merged = [list(ivs[0])]
    for a, b in ivs[1:]:
        if a <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    if len(merged) > 1 and merged[0][0] <= tol and merged[-1][1] >= L - tol:
        merged[0][0] = merged[-1][0] - L
        merged.pop()
    if sum(b - a for a, b in merged) >= L - tol:
        return (0.0, L)
    gaps = []
    for i, (a, b) in enumerate(merged):
        nxt = merged[(i + 1) % len(merged)][0] + (L if i == len(merged) - 1 else 0.0)
        gaps.append((nxt - b, b))
    width, gap_start = max(gaps)
    start = (gap_start + width) % L
    return (start, L - width)


def loop_piece(es: ElementSet, s0: float, length: float) -> ElementSet:
    """The stretch of a closed chain from arclength ``s0`` forward by ``length``, cut exactly."""
    L = es.lengths
    offs = np.concatenate([[0.0], np.cumsum(L)])
    total = offs[-1]
    rows, kinds = [], []
    for base in (0.0, total):
        a, b = s0 - base, s0 + length - base
        for i in range(len(es)):
            lo, hi = max(a, offs[i]), min(b, offs[i + 1])
            if hi - lo <= 1e-15:
                continue
            p = es.params[i].copy()
            u0, u1 = lo - offs[i], hi - offs[i]
            if es.kind[i] == ARC:
                p[3] = (p[3] + u0 / p[2]) % TWO_PI
                p[4] = (u1 - u0) / p[2]
            else:
                q0 = es.point_at([i], [u0])[0]
                q1 = es.point_at([i], [u1])[0]
                p[:4] = [q0[0], q0[1], q1[0], q1[1]]
            rows.append(p)
            kinds.append(es.kind[i])
    return ElementSet(np.asarray(kinds, dtype=np.int64), np.asarray(rows).reshape(-1, 5))


@dataclass(frozen=True)
class EndpointSplitConfig:
    """Cap slack: boundary within sigma_hat + c eps of an estimated endpoint is cut away."""

    c: float = DEFAULT_C

    def __post_init__(self):
        if self.c < 1:
            raise ValueError("c must be >= 1")

    def radius(self, sigma_hat: float, eps: float) -> float:
        return sigma_hat + self.c * eps


def split_open(arrangement, x0, x1, sigma_hat: float, eps: float | None = None,
               config: EndpointSplitConfig | None = None) -> SplitBoundary:
    """Cut the single boundary loop of an open tube at the two estimated end caps."""
    config = config or EndpointSplitConfig()
    eps = arrangement.epsilon if eps is None else eps
    if arrangement.n_loops != 1:
        raise SplitError(f"cap separation failed: expected one boundary loop, found {arrangement.n_loops}")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    R = config.radius(sigma_hat, eps)
    if float(np.hypot(*(x1 - x0))) <= 2 * R:
        raise SplitError("cap separation failed: endpoint estimates closer than 2 (sigma_hat + c eps)")
    es = arrangement.loop_elements(0)
    total = float(es.lengths.sum())
    tol = 1e-9 * max(1.0, total)
    cuts = []
    for x in (x0, x1):
        comp = _completion(_loop_intervals(es, x, R), total, tol)
        if comp is None:
            raise SplitError("cap separation failed: a cap ball misses the boundary")
        cuts.append(comp)
    (a0, l0), (a1, l1) = cuts
    # free stretches run from the end of one cut to the start of the other
    gap01 = (a1 - (a0 + l0)) % total
    gap10 = (a0 - (a1 + l1)) % total
    if gap01 + gap10 + l0 + l1 > total + tol or min(gap01, gap10) <= tol:
        raise SplitError("cap separation failed: remainder does not have two components")
    side0 = loop_piece(es, (a0 + l0) % total, gap01)
    side1 = loop_piece(es, (a1 + l1) % total, gap10)
    caps = [loop_piece(es, a0, l0), loop_piece(es, a1, l1)]
    pieces = [_inside_pieces(es, x, R) for x in (x0, x1)]
    return SplitBoundary(side0, side1, False, "open-split", caps, pieces)


def _inside_pieces(es: ElementSet, center, radius: float) -> ElementSet:
    parts = [loop_piece(es, a, b - a) for a, b in _loop_intervals(es, center, radius) if b > a]
    return ElementSet.concat(parts) if parts else ElementSet.concat([])


# -- midpoints ------------------------------------------------------------------


@dataclass(eq=False)
class MedialEstimate:
    """Side-0 samples, their nearest side-1 points and the midpoints, in side-0 order."""

    y: np.ndarray
    y_near: np.ndarray
    midpoints: np.ndarray
    breakpoints: np.ndarray
    spacing: float
    closed: bool

    def __len__(self) -> int:
        return len(self.midpoints)


def medial_fit(split: SplitBoundary, spacing: float) -> MedialEstimate:
    """Midpoints of the segments joining side-0 samples to their nearest side-1 points.

    A breakpoint index i marks a jump larger than 3 * spacing between
    midpoints i and i+1.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if len(split.side0) == 0 or len(split.side1) == 0:
        raise SplitError("empty boundary side")
    y = split.side0.sample(spacing, include_end=False)
    if not split.closed:
        y = np.vstack([y, split.side0.end_points()[-1:]])
    y = _dedupe(y)
    _, _, near = split.side1.nearest(y)
    mid = 0.5 * (y + near)
    steps = np.hypot(*np.diff(mid, axis=0).T)
    brk = np.flatnonzero(steps > BREAK_FACTOR * spacing)
    if split.closed and len(mid) > 1 and math.hypot(*(mid[0] - mid[-1])) > BREAK_FACTOR * spacing:
        brk = np.append(brk, len(mid) - 1)
    return MedialEstimate(y, near, mid, brk, float(spacing), split.closed)


def _dedupe(pts: np.ndarray, closed: bool = False) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.hypot(*np.diff(pts, axis=0).T) > 0
    pts = pts[keep]
    if closed and len(pts) > 1 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    return pts


def complete(estimate: MedialEstimate) -> Polyline:
    """Join the midpoints in order; jumps at breakpoints become single straight segments."""
    v = _dedupe(estimate.midpoints, estimate.closed)
    if len(v) < 2:
        raise GeometryError("completion needs at least two distinct midpoints")
    poly = Polyline(v, estimate.closed)
    if estimate.closed and not polyline_is_simple(poly):
        raise SplitError("completion not simple")
    return poly


# -- end-cap diagnostics ----------------------------------------------------------


def cap_constants(c: float, eps: float, sigma: float, length: float, delta: float) -> dict:
    """a(c, eps), b = a phi (1 + sigma/Delta) and d = phi a for the end-cap bounds."""
    ratio = 0.0 if delta >= 1e11 else sigma / delta
    a = math.sqrt((2 * sigma * c + c * c * eps) / (length ** 2 * (1 - ratio)))
    return {"a": a, "b": a * length * (1 + ratio), "d": length * a}


def cap_region(model, which: int, a: float, spacing: float) -> np.ndarray:
    """Samples of V_i(a): the true end cap plus both offset sides for u within a of the end."""
    pieces = model.boundary_pieces(spacing)
    c = model.curve
    k = max(2, int(math.ceil(a * c.length / spacing)) + 1)
    u = np.linspace(0.0, min(a, 1.0), k)
    if which == 1:
        u = 1.0 - u
    f = c.eval(u)
    N = c.normal(u)
    return np.vstack([pieces[f"cap{which}"], f + model.sigma * N, f - model.sigma * N])
