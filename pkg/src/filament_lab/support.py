"""Union-of-balls support estimate and its boundary as an arc arrangement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import kernels
from .geom import ANGLE_TOL, TWO_PI, ElementSet, arc_crossings

log = logging.getLogger(__name__)

DEFAULT_RATE_C = 1.6
STITCH_TOL = 1e-9


class ArrangementError(RuntimeError):
    """Arc endpoints failed to chain into closed loops."""


def select_epsilon(points, method: str = "nn-max", C: float = DEFAULT_RATE_C, alpha: float = 0.5) -> float:
    """Ball radius: largest nearest-neighbor distance, or C (log n / n)^(1/(2+alpha))."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least 2 points to select epsilon")
    if method == "nn-max":
        d, _ = cKDTree(pts).query(pts, k=2)
        return float(d[:, 1].max())
    if method == "rate-formula":
        return float(C * (math.log(n) / n) ** (1.0 / (2.0 + alpha)))
    raise ValueError(f"unknown epsilon method {method!r}")


@dataclass(eq=False)
class BallUnion:
    """S-hat = union of B(Y_i, epsilon), with ball connectivity."""

    centers: np.ndarray
    epsilon: float
    tree: cKDTree = field(repr=False)
    components: np.ndarray = field(repr=False)
    source_index: np.ndarray = field(repr=False)

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if len(self.components) else 0

    def contains(self, points) -> np.ndarray:
        d, _ = self.tree.query(np.atleast_2d(points))
        return d <= self.epsilon

    def center_distance(self, points) -> tuple[np.ndarray, np.ndarray]:
        return self.tree.query(np.atleast_2d(points))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.centers.min(0) - self.epsilon
        hi = self.centers.max(0) + self.epsilon
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def component_points(self, k: int) -> np.ndarray:
        return self.centers[self.components == k]


def build(points, epsilon: float) -> BallUnion:
    """Index the balls and label connected components (overlap chains)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one point")
    centers, first = np.unique(pts, axis=0, return_index=True)
    order = np.argsort(first)
    centers, first = centers[order], first[order]
    tree = cKDTree(centers)
    n = len(centers)
    pairs = tree.query_pairs(2.0 * epsilon, output_type="ndarray")
    if len(pairs):
        g = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(g, directed=False)
    else:
        labels = np.arange(n)
    return BallUnion(centers, float(epsilon), tree, labels.astype(np.int64), first)


def contains(union: BallUnion, y) -> np.ndarray:
    return union.contains(y)


def _interior_balls(union: BallUnion) -> np.ndarray:
    """Balls certainly swallowed by neighbors: one neighbor within 1.3 eps in each 45 degree sector."""
    n = len(union.centers)
    k = min(41, n)
    if k < 9:
        return np.zeros(n, dtype=bool)
    d, idx = union.tree.query(union.centers, k=k)
    d, idx = d[:, 1:], idx[:, 1:]
    vec = union.centers[idx] - union.centers[:, None, :]
    sector = (np.mod(np.arctan2(vec[..., 1], vec[..., 0]), TWO_PI) // (math.pi / 4)).astype(np.int64)
    sector = np.minimum(sector, 7)
    ok = d <= 1.3 * union.epsilon
    hit = np.zeros((n, 8), dtype=bool)
    rows = np.repeat(np.arange(n), k - 1).reshape(n, k - 1)
    hit[rows[ok], sector[ok]] = True
    return hit.all(axis=1)


@dataclass(eq=False)
class BoundaryArrangement:
    """Boundary arcs of the union, chained into closed loops."""

    elements: ElementSet
    ball: np.ndarray
    loops: list[np.ndarray]
    orientation: np.ndarray
    loop_component: np.ndarray
    epsilon: float

    def loop_elements(self, k: int) -> ElementSet:
        return self.elements.subset(self.loops[k])

    @property
    def loop_lengths(self) -> np.ndarray:
        L = self.elements.lengths
        return np.array([L[lp].sum() for lp in self.loops])

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    def nearest(self, points):
        return self.elements.nearest(points)

    def sample(self, spacing: float) -> np.ndarray:
        return self.elements.sample(spacing)

    def loop_winding(self, k: int, points) -> np.ndarray:
        return arc_crossings(self.loop_elements(k), points)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "arcs": [
                {"center": [p[0], p[1]], "radius": p[2], "start_angle": p[3], "end_angle": (p[3] + p[4]) % TWO_PI,
                 "full_circle": bool(p[4] >= TWO_PI - ANGLE_TOL), "ball": int(b)}
                for p, b in zip(self.elements.params, self.ball)
            ],
            "loops": [
                {"arcs": [int(i) for i in lp], "orientation": int(o), "component": int(c)}
                for lp, o, c in zip(self.loops, self.orientation, self.loop_component)
            ],
        }


def arrangement_from_loops(loops, epsilon: float) -> BoundaryArrangement:
    """Arrangement made of given closed chains, e.g. the exact boundary of a synthetic tube."""
    loops = [es for es in loops if len(es)]
    if not loops:
        raise ArrangementError("no loops given")
    elements = ElementSet.concat(loops)
    idx, start = [], 0
    for es in loops:
        idx.append(np.arange(start, start + len(es)))
        start += len(es)
    orient = np.array([1 if es.signed_area() > 0 else -1 for es in loops], dtype=np.int64)
    return BoundaryArrangement(elements, np.full(len(elements), -1, dtype=np.int64), idx, orient,
                               np.zeros(len(loops), dtype=np.int64), float(epsilon))


def _cover_intervals(union: BallUnion, balls: np.ndarray):
    c = union.centers
    eps = union.epsilon
    lists = union.tree.query_ball_point(c[balls], 2.0 * eps)
    counts = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(balls))
    owner = np.repeat(np.arange(len(balls)), counts)
    nbr = np.concatenate([np.asarray(x, dtype=np.int64) for x in lists]) if counts.sum() else np.zeros(0, np.int64)
    keep = nbr != balls[owner]
    owner, nbr = owner[keep], nbr[keep]
    v = c[nbr] - c[balls[owner]]
    d = np.hypot(v[:, 0], v[:, 1])
    theta = np.arctan2(v[:, 1], v[:, 0])
    w = np.arccos(np.clip(d / (2.0 * eps), -1.0, 1.0))
    starts = np.mod(theta - w, TWO_PI)
    ends = starts + 2.0 * w
    order = np.lexsort((starts, owner))
    owner, nbr, starts, ends = owner[order], nbr[order], starts[order], ends[order]
    ptr = np.zeros(len(balls) + 1, dtype=np.int64)
    np.add.at(ptr, owner + 1, 1)
    return np.cumsum(ptr), nbr, starts, ends


def _stitch(elements: ElementSet, ball: np.ndarray, nb_end: np.ndarray, tol: float) -> np.ndarray:
    n = len(ball)
    nxt = np.arange(n)
    open_arcs = np.flatnonzero(nb_end >= 0)
    if open_arcs.size == 0:
        return nxt
    ends = elements.end_points()
    starts = elements.start_points()
    first = np.searchsorted(ball, nb_end[open_arcs], side="left")
    last = np.searchsorted(ball, nb_end[open_arcs], side="right")
    counts = last - first
    if np.any(counts == 0):
        raise ArrangementError("degenerate arrangement: arc end has no continuation")
    src = np.repeat(open_arcs, counts)
    cand = np.concatenate([np.arange(a, b) for a, b in zip(first, last)])
    dist = np.hypot(*(ends[src] - starts[cand]).T)
    order = np.lexsort((dist, src))
    src, cand, dist = src[order], cand[order], dist[order]
    head = np.ones(len(src), dtype=bool)
    head[1:] = src[1:] != src[:-1]
    if np.any(dist[head] > tol):
        raise ArrangementError(f"degenerate arrangement: endpoint gap {dist[head].max():.3g}")
    nxt[src[head]] = cand[head]
    if len(np.unique(nxt)) != n:
        raise ArrangementError("degenerate arrangement: endpoint matching is not one-to-one")
    return nxt


def _boundary_once(union: BallUnion) -> BoundaryArrangement:
    eps = union.epsilon
    interior = _interior_balls(union)
    balls = np.flatnonzero(~interior)
    ptr, nbr, starts, ends = _cover_intervals(union, balls)
    ball, a0, span, nb_s, nb_e = kernels.uncovered_arcs(union.centers, eps, balls, ptr, nbr, starts, ends, ANGLE_TOL)
    c = union.centers[ball]
    elements = ElementSet.from_arcs(np.column_stack([c, np.full(len(ball), eps), a0, span]))
    scale = max(1.0, float(np.abs(union.centers).max()) + eps)
    nxt = _stitch(elements, ball, nb_e, STITCH_TOL * scale)

    seen = np.zeros(len(ball), dtype=bool)
    loops = []
    for s in range(len(ball)):
        if seen[s]:
            continue
        lp = [s]
        seen[s] = True
        j = nxt[s]
        while j != s:
            if seen[j]:
                raise ArrangementError("degenerate arrangement: loop does not close")
            lp.append(j)
            seen[j] = True
            j = nxt[j]
        loops.append(np.asarray(lp, dtype=np.int64))
    orient = np.array([1 if elements.subset(lp).signed_area() > 0 else -1 for lp in loops], dtype=np.int64)
    comp = np.array([union.components[ball[lp[0]]] for lp in loops], dtype=np.int64)
    return BoundaryArrangement(elements, ball, loops, orient, comp, eps)


def boundary(union: BallUnion) -> BoundaryArrangement:
    """Exact boundary arcs of the union, chained into closed loops.

    On a stitching failure the radius is perturbed by 1e-9 relative and the
    construction retried once.
    """
    try:
        return _boundary_once(union)
    except ArrangementError as exc:
        log.warning("retrying boundary with perturbed epsilon: %s", exc)
        bumped = BallUnion(union.centers, union.epsilon * (1.0 + 1e-9), union.tree, union.components, union.source_index)
        arr = _boundary_once(bumped)
        return arr


def distance_to_boundary(union: BallUnion, arrangement: BoundaryArrangement, y) -> np.ndarray:
    """Exact distance from points to the boundary of the union."""
    pts = np.atleast_2d(np.asarray(y, dtype=float))
    dc, _ = union.tree.query(pts)
    out = dc - union.epsilon
    inside = dc <= union.epsilon
    if np.any(inside):
        out[inside] = arrangement.elements.distance(pts[inside])
    return out


@dataclass(eq=False)
class SupportEstimate:
    """A union of balls paired with its boundary, exposing the distance-field interface."""

    union: BallUnion
    arrangement: BoundaryArrangement

    @property
    def epsilon(self) -> float:
        return self.union.epsilon

    @property
    def bounds(self):
        return self.union.bounds

    def contains(self, points) -> np.ndarray:
        return self.union.contains(points)

    def boundary_distance(self, points) -> np.ndarray:
        return distance_to_boundary(self.union, self.arrangement, points)

    def seed_points(self) -> np.ndarray:
        return self.union.centers


def estimate_support(points, epsilon: float | None = None, method: str = "nn-max", **kw) -> SupportEstimate:
    if epsilon is None:
        epsilon = select_epsilon(points, method, **kw)
    u = build(points, epsilon)
    return SupportEstimate(u, boundary(u))


def restrict(estimate: SupportEstimate, component: int) -> SupportEstimate:
    """Sub-estimate for one connected component of the union."""
    pts = estimate.union.component_points(component)
    u = build(pts, estimate.union.epsilon)
    return SupportEstimate(u, boundary(u))
