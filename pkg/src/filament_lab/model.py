"""Ground-truth filaments: curve families, thickness, the support tube and its exact EDT."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import cKDTree

from .geom import ElementSet, GeometryError, Polyline, TWO_PI, polyline_is_simple

log = logging.getLogger(__name__)

INF_THICKNESS = 1e12
FAMILIES = ("circle", "ellipse", "segment", "sine-arc", "spiral", "user-polyline")


class ModelError(ValueError):
    pass


# -- parametric families (t in [0, 1]) ----------------------------------------


def _family_functions(family: str, params: dict) -> tuple[Callable, Callable, Callable, bool]:
    """Return p(t), p'(t), p''(t) vectorized over t, and the closed flag."""
    if family == "circle":
        c = np.asarray(params.get("center", (0.0, 0.0)), dtype=float)
        R = float(params.get("radius", 1.0))
        w = TWO_PI

        def p(t):
            return c + R * np.column_stack([np.cos(w * t), np.sin(w * t)])

        def dp(t):
            return R * w * np.column_stack([-np.sin(w * t), np.cos(w * t)])

        def ddp(t):
            return -R * w * w * np.column_stack([np.cos(w * t), np.sin(w * t)])

        return p, dp, ddp, True

    if family == "ellipse":
        c = np.asarray(params.get("center", (0.0, 0.0)), dtype=float)
        a = float(params.get("a", 2.0))
        b = float(params.get("b", 1.0))
        w = TWO_PI

        def p(t):
            return c + np.column_stack([a * np.cos(w * t), b * np.sin(w * t)])

        def dp(t):
            return w * np.column_stack([-a * np.sin(w * t), b * np.cos(w * t)])

        def ddp(t):
            return -w * w * np.column_stack([a * np.cos(w * t), b * np.sin(w * t)])

        return p, dp, ddp, True

    if family == "segment":
        s = np.asarray(params.get("start", (0.0, 0.0)), dtype=float)
        e = np.asarray(params.get("end", (1.0, 0.0)), dtype=float)
        d = e - s

        def p(t):
            return s + np.outer(t, d)

        def dp(t):
            return np.tile(d, (len(t), 1))

        def ddp(t):
            return np.zeros((len(t), 2))

        return p, dp, ddp, False

    if family == "sine-arc":
        s = np.asarray(params.get("start", (-0.6, 0.0)), dtype=float)
        e = np.asarray(params.get("end", (0.6, 0.0)), dtype=float)
        A = float(params.get("amplitude", 0.2))
        k = float(params.get("cycles", 1.0))
        d = e - s
        nrm = np.array([-d[1], d[0]]) / np.hypot(*d)
        w = TWO_PI * k

        def p(t):
            return s + np.outer(t, d) + np.outer(A * np.sin(w * t), nrm)

        def dp(t):
            return np.outer(np.ones_like(t), d) + np.outer(A * w * np.cos(w * t), nrm)

        def ddp(t):
            return np.outer(-A * w * w * np.sin(w * t), nrm)

        return p, dp, ddp, False

    if family == "spiral":
        c = np.asarray(params.get("center", (0.0, 0.0)), dtype=float)
        r0 = float(params.get("r0", 0.2))
        g = float(params.get("growth", 0.1))
        th0 = float(params.get("theta0", 0.0))
        th1 = float(params.get("theta1", 2.0 * math.pi))
        L = th1 - th0

        def p(t):
            th = th0 + L * t
            r = r0 + g * (th - th0)
            return c + np.column_stack([r * np.cos(th), r * np.sin(th)])

        def dp(t):
            th = th0 + L * t
            r = r0 + g * (th - th0)
            return L * np.column_stack([g * np.cos(th) - r * np.sin(th), g * np.sin(th) + r * np.cos(th)])

        def ddp(t):
            th = th0 + L * t
            r = r0 + g * (th - th0)
            return L * L * np.column_stack([-2 * g * np.sin(th) - r * np.cos(th), 2 * g * np.cos(th) - r * np.sin(th)])

        return p, dp, ddp, False

    if family == "user-polyline":
        v = np.asarray(params["vertices"], dtype=float)
        closed = bool(params.get("closed", False))
        poly = Polyline(v, closed)
        if not polyline_is_simple(poly):
            raise ModelError("not simple")
        pts = np.vstack([v, v[:1]]) if closed else v
        seg = np.hypot(*np.diff(pts, axis=0).T)
        knots = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        dirs = np.diff(pts, axis=0) / np.diff(knots)[:, None]

        def p(t):
            t = np.asarray(t, dtype=float)
            return np.column_stack([np.interp(t, knots, pts[:, 0]), np.interp(t, knots, pts[:, 1])])

        def dp(t):
            i = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(dirs) - 1)
            return dirs[i]

        def ddp(t):
            return np.zeros((len(np.atleast_1d(t)), 2))

        return p, dp, ddp, closed

    raise ModelError(f"unknown curve family {family!r}; expected one of {FAMILIES}")


# -- curves -------------------------------------------------------------------


@dataclass(frozen=True)
class ThicknessReport:
    delta: float
    lower_witness: tuple
    curvature_bound: float


@dataclass(eq=False)
class FilamentCurve:
    """Arclength-parameterized filament held as an equal-chord dense polyline."""

    family: str
    params: dict
    closed: bool
    vertices: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    length: float
    vertex_u: np.ndarray
    _p: Callable = field(repr=False)
    _dp: Callable = field(repr=False)
    _ddp: Callable = field(repr=False)
    _s_table: np.ndarray = field(repr=False)
    _t_table: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def topology(self) -> str:
        return "closed" if self.closed else "open"

    def _t_of_u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.closed:
            u = np.mod(u, 1.0)
        return np.interp(u * self.length, self._s_table, self._t_table)

    def eval(self, u) -> np.ndarray:
        """Positions f(u) for arclength fractions u (exact on the parametric curve)."""
        return self._p(self._t_of_u(np.atleast_1d(u)))

    def tangent(self, u) -> np.ndarray:
        d = self._dp(self._t_of_u(np.atleast_1d(u)))
        return d / np.hypot(*d.T)[:, None]

    def normal(self, u) -> np.ndarray:
        T = self.tangent(u)
        return np.column_stack([-T[:, 1], T[:, 0]])

    def endpoints(self) -> np.ndarray:
        return self.eval(np.array([0.0, 1.0]))

    def dense(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(u, points) on a fine uniform arclength grid, cached."""
        n = n or max(8192, 16 * len(self.vertices))
        key = ("dense", n)
        if key not in self._cache:
            u = np.linspace(0.0, 1.0, n, endpoint=not self.closed)
            self._cache[key] = (u, self.eval(u))
        return self._cache[key]

    def sample(self, spacing: float) -> np.ndarray:
        k = max(4, int(math.ceil(self.length / spacing)) + 1)
        return self.eval(np.linspace(0.0, 1.0, k, endpoint=not self.closed))

    def as_polyline(self) -> Polyline:
        return Polyline(self.vertices, self.closed)

    def signed_area(self) -> float:
        if not self.closed:
            return 0.0
        _, pts = self.dense()
        x, y = pts.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def distance(self, points, return_u: bool = False):
        """Exact Euclidean distance from points to the curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.family == "circle":
            c = np.asarray(self.params.get("center", (0.0, 0.0)), dtype=float)
            R = float(self.params.get("radius", 1.0))
            v = pts - c
            d = np.abs(np.hypot(*v.T) - R)
            if not return_u:
                return d
            return d, np.mod(np.arctan2(v[:, 1], v[:, 0]) / TWO_PI, 1.0)
        if self.family == "segment":
            a, b = self.endpoints()
            ab = b - a
            t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
            d = np.hypot(*(pts - a - t[:, None] * ab).T)
            return (d, t) if return_u else d
        d, t = self._refined_distance(pts)
        if not return_u:
            return d
        u = np.interp(t, self._t_table, self._s_table) / self.length
        return d, u

    def _refined_distance(self, pts):
        u_d, dense = self.dense()
        t_d = self._t_of_u(u_d)
        if "tree" not in self._cache:
            self._cache["tree"] = cKDTree(dense)
        k = min(4, len(dense))
        _, nn = self._cache["tree"].query(pts, k=k)
        nn = np.atleast_2d(nn)
        best_d = np.full(len(pts), np.inf)
        best_t = np.zeros(len(pts))
        n = len(dense)
        for col in range(k):
            i = nn[:, col]
            for j in (i - 1, i):
                if self.closed:
                    a_i, b_i = np.mod(j, n), np.mod(j + 1, n)
                    ta, tb = t_d[a_i], np.where(b_i == 0, 1.0, t_d[b_i])
                else:
                    a_i = np.clip(j, 0, n - 2)
                    b_i = a_i + 1
                    ta, tb = t_d[a_i], t_d[b_i]
                A, B = dense[a_i], dense[b_i]
                ab = B - A
                L2 = np.maximum((ab * ab).sum(1), 1e-300)
                s = np.clip(((pts - A) * ab).sum(1) / L2, 0.0, 1.0)
                d = np.hypot(*(pts - A - s[:, None] * ab).T)
                better = d < best_d
                best_d = np.where(better, d, best_d)
                best_t = np.where(better, ta + s * (tb - ta), best_t)
        if self.family == "user-polyline":
            return best_d, best_t
        t = best_t.copy()
        for _ in range(4):
            r = self._p(t) - pts
            d1 = self._dp(t)
            d2 = self._ddp(t)
            g = (r * d1).sum(1)
            h = (d1 * d1).sum(1) + (r * d2).sum(1)
            step = np.where(h > 0, g / np.where(h > 0, h, 1.0), 0.0)
            t_new = t - step
            t_new = np.mod(t_new, 1.0) if self.closed else np.clip(t_new, 0.0, 1.0)
            t = t_new
        d_new = np.hypot(*(self._p(t) - pts).T)
        better = d_new < best_d
        return np.where(better, d_new, best_d), np.where(better, t, best_t)

    def thickness(self, m: int = 200) -> ThicknessReport:
        if "thickness" not in self._cache:
            self._cache["thickness"] = thickness(self, m)
        return self._cache["thickness"]


def _equal_chord_params(p: Callable, s_table, t_table, n_seg: int, length: float) -> np.ndarray:
    """Parameters of n_seg + 1 curve points with all consecutive chords equal."""
    dense_t = t_table
    dense = p(dense_t)

    def walk(c: float) -> tuple[float, np.ndarray]:
        ts = np.empty(n_seg + 1)
        ts[0] = 0.0
        i = 0
        q = dense[0]
        n = len(dense)
        for k in range(1, n_seg + 1):
            j = i + 1
            window = 64
            while True:
                hi = min(n, j + window)
                dd = np.hypot(*(dense[j:hi] - q).T)
                hit = np.flatnonzero(dd >= c)
                if hit.size:
                    j = j + int(hit[0])
                    break
                if hi >= n:
                    ts[k:] = 1.0 + (np.arange(k, n_seg + 1) - k + 1) * c / length
                    return ts[-1] - 1.0, ts
                j = hi
                window *= 2
            lo_t, hi_t = dense_t[j - 1], dense_t[j]
            fq = lambda t: float(np.hypot(*(p(np.array([t]))[0] - q))) - c
            f_lo = fq(lo_t)
            if f_lo >= 0:
                t_new = lo_t
            else:
                t_new = optimize.brentq(fq, lo_t, hi_t, xtol=1e-15, rtol=1e-15)
            ts[k] = t_new
            q = p(np.array([t_new]))[0]
            i = max(j - 1, i)
        return ts[-1] - 1.0, ts

    h = length / n_seg
    lo, hi = 0.98 * h, h * (1.0 + 1e-9)
    c = optimize.brentq(lambda c: walk(c)[0], lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return walk(c)[1]


def build_curve(family: str, params: dict | None = None, m: int = 512) -> FilamentCurve:
    """Construct a filament from a named family and parameter object."""
    params = dict(params or {})
    if m < 16:
        raise ModelError("resolution m must be >= 16")
    p, dp, ddp, closed = _family_functions(family, params)
    n_table = max(40001, 64 * m + 1)
    t_table = np.linspace(0.0, 1.0, n_table)
    speed = np.hypot(*dp(t_table).T)
    s_table = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t_table))])
    if family == "user-polyline":
        length = float(s_table[-1])
    else:
        spd = lambda t: float(np.hypot(*dp(np.array([t]))[0]))
        length = float(integrate.quad(spd, 0.0, 1.0, limit=400, epsabs=1e-13, epsrel=1e-13)[0])
        s_table *= length / s_table[-1]
    if not length > 0:
        raise ModelError("degenerate curve of zero length")

    n_seg = m if closed else m - 1
    if family in ("circle", "segment", "user-polyline"):
        u = np.linspace(0.0, 1.0, n_seg + 1)
        ts = np.interp(u * length, s_table, t_table) if family == "user-polyline" else u
    else:
        ts = _equal_chord_params(p, s_table, t_table, n_seg, length)
    if closed:
        ts = ts[:-1]
    verts = p(ts)
    if family == "user-polyline":
        T = np.gradient(verts, axis=0) if not closed else np.roll(verts, -1, 0) - np.roll(verts, 1, 0)
    else:
        T = dp(ts)
    T = T / np.hypot(*T.T)[:, None]
    N = np.column_stack([-T[:, 1], T[:, 0]])
    vu = np.interp(ts, t_table, s_table) / length
    return FilamentCurve(family, params, closed, verts, T, N, length, vu, p, dp, ddp, s_table, t_table)


def _circumradius(a, b, c):
    ab = np.hypot(*(b - a).T) if a.ndim > 1 else np.hypot(*(b - a))
    bc = np.hypot(*(c - b).T) if a.ndim > 1 else np.hypot(*(c - b))
    ca = np.hypot(*(a - c).T) if a.ndim > 1 else np.hypot(*(a - c))
    cross = (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])
    area2 = np.abs(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ab * bc * ca / (2.0 * area2)
    return np.where(area2 > 1e-14 * np.maximum(ab * bc * ca, 1e-300) ** (2 / 3), r, np.inf)


def triples_min_radius(points: np.ndarray) -> tuple[float, tuple[int, int, int]]:
    """Minimum circumradius over all vertex triples (collinear triples are +inf)."""
    n = len(points)
    best = np.inf
    arg = (0, 1, 2)
    jj, kk = np.triu_indices(n, 1)
    for i in range(n - 2):
        sel = jj > i
        j, k = jj[sel], kk[sel]
        r = _circumradius(np.broadcast_to(points[i], (len(j), 2)), points[j], points[k])
        a = int(np.argmin(r))
        if r[a] < best:
            best = float(r[a])
            arg = (i, int(j[a]), int(k[a]))
    return best, arg


def _golden(f, a, b, iters=40):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def thickness(curve: FilamentCurve, m: int = 200) -> ThicknessReport:
    """Minimum circumradius over triples of curve points, with the curvature-only bound."""
    if len(curve.vertices) < 3:
        raise ModelError("thickness needs at least 3 vertices")
    u = np.linspace(0.0, 1.0, m, endpoint=not curve.closed)
    pts = curve.eval(u)
    best, (i, j, k) = triples_min_radius(pts)
    uvw = [u[i], u[j], u[k]]

    # curvature bound on a fine grid
    t = np.linspace(0.0, 1.0, 20001)
    d1 = curve._dp(t)
    d2 = curve._ddp(t)
    cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    kappa = cross / np.hypot(*d1.T) ** 3
    kmax = float(kappa.max())
    curv_bound = 1.0 / kmax if kmax > 1e-12 else INF_THICKNESS

    if np.isfinite(best):
        h = 1.0 / m
        sep = h / 50

        def radius_at(vals):
            p = curve.eval(np.asarray(vals))
            if min(abs(vals[0] - vals[1]), abs(vals[1] - vals[2]), abs(vals[0] - vals[2])) < sep:
                return np.inf
            return float(_circumradius(p[0], p[1], p[2]))

        for _ in range(3):
            for slot in range(3):
                lo = uvw[slot] - h
                hi = uvw[slot] + h
                if not curve.closed:
                    lo, hi = max(lo, 0.0), min(hi, 1.0)

                def f(x, slot=slot):
                    vals = list(uvw)
                    vals[slot] = x
                    return radius_at(vals)

                x, fx = _golden(f, lo, hi)
                if fx < best:
                    best = fx
                    uvw[slot] = x
    delta = min(best, curv_bound)
    if not np.isfinite(delta) or delta >= INF_THICKNESS:
        delta = INF_THICKNESS
    witness = tuple(map(tuple, curve.eval(np.asarray(uvw))))
    return ThicknessReport(float(delta), witness, float(min(curv_bound, INF_THICKNESS)))


# -- support ------------------------------------------------------------------


@dataclass(eq=False)
class SupportModel:
    """The tube S = union of B(f(u), sigma) with its boundary and medial axis."""

    curve: FilamentCurve
    sigma: float
    check: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        if self.check:
            delta = self.curve.thickness().delta
            if self.sigma >= delta:
                raise ModelError(f"thickness violated: sigma={self.sigma} >= Delta={delta:.6g}")
            if not self.curve.closed:
                a, b = self.curve.endpoints()
                if self.sigma >= 0.5 * float(np.hypot(*(b - a))):
                    raise ModelError("sigma must be below half the endpoint separation")

    @property
    def medial_axis(self) -> FilamentCurve:
        return self.curve

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        return self.curve.distance(points) <= self.sigma + tol

    def edt(self, points) -> np.ndarray:
        """Distance to the support boundary, for points inside or outside S."""
        return np.abs(self.sigma - self.curve.distance(points))

    # boundary-distance interface shared with estimated supports
    def boundary_distance(self, points) -> np.ndarray:
        return self.edt(points)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        _, pts = self.curve.dense()
        lo = pts.min(0) - self.sigma
        hi = pts.max(0) + self.sigma
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def _outer_sign(self) -> float:
        # for a counter-clockwise curve the left normal points inward
        return -1.0 if self.curve.signed_area() > 0 else 1.0

    def boundary_pieces(self, spacing: float) -> dict[str, np.ndarray]:
        """Exact samples of the boundary parts at roughly ``spacing``.

        Closed: ``outer``/``inner``. Open: ``side0`` (f + sigma N), ``side1``
        (f - sigma N), ``cap0``, ``cap1``.
        """
        c = self.curve
        k = max(16, int(math.ceil((c.length + TWO_PI * self.sigma) / spacing)) + 1)
        u = np.linspace(0.0, 1.0, k, endpoint=not c.closed)
        f = c.eval(u)
        N = c.normal(u)
        if c.closed:
            s = self._outer_sign()
            return {"outer": f + s * self.sigma * N, "inner": f - s * self.sigma * N}
        ncap = max(8, int(math.ceil(math.pi * self.sigma / spacing)) + 1)
        caps = {}
        for name, uu, back in (("cap0", 0.0, -1.0), ("cap1", 1.0, 1.0)):
            p0 = c.eval(np.array([uu]))[0]
            T = back * c.tangent(np.array([uu]))[0]
            base = math.atan2(T[1], T[0])
            ang = base + np.linspace(-0.5 * math.pi, 0.5 * math.pi, ncap)
            caps[name] = p0 + self.sigma * np.column_stack([np.cos(ang), np.sin(ang)])
        return {"side0": f + self.sigma * N, "side1": f - self.sigma * N, **caps}

    def boundary_samples(self, spacing: float) -> np.ndarray:
        return np.vstack(list(self.boundary_pieces(spacing).values()))

    def boundary_elements(self, resolution: int = 4096) -> list[ElementSet]:
        """Boundary loops as arc/segment chains: exact for circle and segment families."""
        c = self.curve
        if c.family == "circle":
            cen = c.params.get("center", (0.0, 0.0))
            R = float(c.params.get("radius", 1.0))
            return [
                ElementSet.from_arcs([[cen[0], cen[1], R + self.sigma, 0.0, TWO_PI]]),
                ElementSet.from_arcs([[cen[0], cen[1], R - self.sigma, 0.0, TWO_PI]]),
            ]
        u = np.linspace(0.0, 1.0, resolution, endpoint=not c.closed)
        f = c.eval(u)
        N = c.normal(u)
        if c.closed:
            s = self._outer_sign()
            loops = []
            for sign in (s, -s):
                v = f + sign * self.sigma * N
                loops.append(ElementSet.from_segments(v, np.roll(v, -1, axis=0)))
            return loops
        if c.family == "segment":
            f = c.endpoints()
            N = c.normal(np.array([0.0, 1.0]))
        right = f - self.sigma * N
        left = (f + self.sigma * N)[::-1]
        T1 = c.tangent(np.array([1.0]))[0]
        T0 = c.tangent(np.array([0.0]))[0]
        a1 = math.atan2(T1[1], T1[0]) - 0.5 * math.pi
        a0 = math.atan2(T0[1], T0[0]) + 0.5 * math.pi
        p0, p1 = c.endpoints()
        return [ElementSet.concat([
            ElementSet.from_segments(right[:-1], right[1:]),
            ElementSet.from_arcs([[p1[0], p1[1], self.sigma, a1 % TWO_PI, math.pi]]),
            ElementSet.from_segments(left[:-1], left[1:]),
            ElementSet.from_arcs([[p0[0], p0[1], self.sigma, a0 % TWO_PI, math.pi]]),
        ])]

    def fibers(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of the normal segments L(u) of half-length sigma."""
        f = self.curve.eval(u)
        N = self.curve.normal(u)
        return f - self.sigma * N, f + self.sigma * N


def support_model(curve: FilamentCurve, sigma: float) -> SupportModel:
    return SupportModel(curve, sigma)


def true_edt(model: SupportModel, y) -> np.ndarray:
    return model.edt(y)


def support_contains(model: SupportModel, y) -> np.ndarray:
    return model.contains(y)


def curve_from_config(cfg: dict[str, Any]) -> FilamentCurve:
    """Build a curve from ``{"family": ..., "params": {...}, "m": ...}``."""
    try:
        family = cfg["family"]
    except KeyError as exc:
        raise ModelError("curve config needs a 'family'") from exc
    return build_curve(family, cfg.get("params", {}), int(cfg.get("m", 512)))
