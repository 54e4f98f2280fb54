"""Curve extraction from an EDT region.

A xi-net of the region's grid points is joined into a graph, reduced to its
minimum spanning tree, and the tree path between the two nodes that are
farthest apart along the tree becomes the curve. Closed filaments are handled
by cutting the region near the ridge point, extracting the resulting open
piece, and closing it back through the cut.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, identity
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .geom import Polyline, polyline_is_simple, winding_number

log = logging.getLogger(__name__)

XI_FRACTION = 1.0 / 8.0
LINK_FACTOR = 2.5
CUT_RADIUS = 6.0
GAP_FRACTION = 0.1
RELAX_ITERS = 200
BISECT_STEPS = 8
HITTING_ROUNDS = 10


class ExtractionError(RuntimeError):
    pass


# -- graph ----------------------------------------------------------------------


@dataclass(eq=False)
class NetGraph:
    """Net nodes and undirected edges (i < j) with Euclidean weights."""

    nodes: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    xi: float
    link: float

    @property
    def n(self) -> int:
        return len(self.nodes)

    def matrix(self) -> csr_matrix:
        n = self.n
        e = self.edges
        return coo_matrix((np.concatenate([self.weights, self.weights]),
                           (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
                          shape=(n, n)).tocsr()

    def components(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0, dtype=np.int64)
        _, lab = connected_components(self.matrix(), directed=False)
        return lab

    def subgraph(self, keep) -> "NetGraph":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges] if len(self.edges) else self.edges.reshape(0, 2)
        ok = (e >= 0).all(axis=1) if len(e) else np.zeros(0, dtype=bool)
        return NetGraph(self.nodes[keep], e[ok], self.weights[ok], self.xi, self.link)


def greedy_net(points: np.ndarray, xi: float) -> np.ndarray:
    """Indices of a maximal subset, scanned in input order, with pairwise distances >= xi."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    if len(pts) > 1:
        d, _ = cKDTree(pts).query(pts, k=2)
        if d[:, 1].min() >= xi:
            return np.arange(len(pts))
    cells: dict[tuple[int, int], list[int]] = {}
    kept = []
    xi2 = xi * xi
    for i, (x, y) in enumerate(pts):
        ci, cj = int(math.floor(x / xi)), int(math.floor(y / xi))
        ok = True
        for a in (ci - 1, ci, ci + 1):
            for b in (cj - 1, cj, cj + 1):
                for k in cells.get((a, b), ()):
                    dx, dy = pts[k, 0] - x, pts[k, 1] - y
                    if dx * dx + dy * dy < xi2:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            kept.append(i)
            cells.setdefault((ci, cj), []).append(i)
    return np.asarray(kept, dtype=np.int64)


def net_from_points(points, xi: float, link: float | None = None) -> NetGraph:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ExtractionError("empty region")
    if not xi > 0:
        raise ValueError("xi must be positive")
    link = LINK_FACTOR * xi if link is None else link
    nodes = pts[greedy_net(pts, xi)]
    pairs = cKDTree(nodes).query_pairs(link, output_type="ndarray") if len(nodes) > 1 else np.zeros((0, 2), np.int64)
    pairs = np.sort(pairs.astype(np.int64), axis=1).reshape(-1, 2)
    w = np.hypot(*(nodes[pairs[:, 0]] - nodes[pairs[:, 1]]).T) if len(pairs) else np.zeros(0)
    return NetGraph(nodes, pairs, w, float(xi), float(link))


def build_net(region, xi: float | None = None) -> NetGraph:
    """xi-net of the region's grid points (default xi = eps/8), linked within 2.5 xi."""
    eps = region.epsilon
    xi = XI_FRACTION * eps if xi is None else xi
    if math.isfinite(eps) and not 0 < xi < eps / 4:
        raise ValueError("xi must lie in (0, eps/4)")
    return net_from_points(region.region_points, xi)


# -- trees ----------------------------------------------------------------------


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


@dataclass(eq=False)
class Tree:
    nodes: np.ndarray
    edges: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (a, b), w in zip(self.edges.tolist(), self.weights.tolist()):
            adj[a].append((b, w))
            adj[b].append((a, w))
        return adj

    def matrix(self) -> csr_matrix:
        return NetGraph(self.nodes, self.edges, self.weights, 0.0, 0.0).matrix()

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)


def mst(graph: NetGraph) -> Tree:
    """Kruskal's algorithm; ties broken by (weight, i, j)."""
    n = graph.n
    if n == 0:
        raise ExtractionError("empty graph")
    e = graph.edges
    order = np.lexsort((e[:, 1], e[:, 0], graph.weights)) if len(e) else np.zeros(0, dtype=np.int64)
    ds = _DisjointSet(n)
    chosen = []
    for k in order.tolist():
        if ds.union(int(e[k, 0]), int(e[k, 1])):
            chosen.append(k)
            if len(chosen) == n - 1:
                break
    if len(chosen) != n - 1:
        raise ExtractionError("net not connected")
    chosen = np.asarray(chosen, dtype=np.int64)
    return Tree(graph.nodes, e[chosen].reshape(-1, 2), graph.weights[chosen])


def tree_distances(tree, sources) -> np.ndarray:
    """Path-length distances from ``sources`` in a tree or net graph."""
    return np.atleast_2d(dijkstra(tree.matrix(), directed=False, indices=np.atleast_1d(sources)))


def max_min_endpoints(tree, e0=None, e1=None) -> tuple[int, int]:
    """Node pair with the longest shortest path, each end restricted to its constraint set.

    ``tree`` may be the spanning tree or the net graph itself (geodesic
    distances in the region). Without constraints the pair comes from a
    double sweep, which is exact on a tree.
    With constraints every allowed node of ``e0`` is tried against all
    allowed nodes of ``e1``. Ties go to the smallest node ids.
    """
    n = tree.n
    if n < 2:
        raise ExtractionError("tree has fewer than two nodes")
    m0 = np.ones(n, dtype=bool) if e0 is None else _mask(e0, tree)
    m1 = np.ones(n, dtype=bool) if e1 is None else _mask(e1, tree)
    if not m0.any() or not m1.any():
        raise ExtractionError("constraint set has no nodes")
    if e0 is None and e1 is None:
        d = tree_distances(tree, 0)[0]
        a = int(np.argmax(d))
        d = tree_distances(tree, a)[0]
        b = int(np.argmax(d))
        return (min(a, b), max(a, b)) if a != b else (a, b)
    src = np.flatnonzero(m0)
    D = tree_distances(tree, src)
    D[:, ~m1] = -np.inf
    flat = int(np.argmax(D))
    i, j = divmod(flat, n)
    return int(src[i]), int(j)


def _mask(constraint, tree) -> np.ndarray:
    if callable(constraint):
        return np.asarray(constraint(tree.nodes), dtype=bool)
    c = np.asarray(constraint)
    if c.dtype == bool:
        return c
    m = np.zeros(tree.n, dtype=bool)
    m[c] = True
    return m


def shortest_path(graph, a: int, b: int) -> np.ndarray:
    """Node indices of a minimal-weight path from a to b (Dijkstra with a binary heap)."""
    if a == b:
        raise ExtractionError("degenerate path: both ends are the same node")
    if isinstance(graph, Tree):
        adj = graph.adjacency()
    else:
        adj = Tree(graph.nodes, graph.edges, graph.weights).adjacency()
    dist = {a: 0.0}
    prev = {}
    heap = [(0.0, a)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == b:
            break
        for v, w in adj[u]:
            nd = d + w
            if nd < dist.get(v, math.inf) or (nd == dist.get(v) and u < prev.get(v, math.inf)):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if b not in done:
        raise ExtractionError("endpoints are not connected")
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return np.asarray(path[::-1], dtype=np.int64)


def hitting_refine(graph: NetGraph, a: int, b: int, e0=None, e1=None, rounds: int = HITTING_ROUNDS) -> tuple[int, int]:
    """Alternately move each end to the node with the largest expected random-walk hitting time to the other."""
    n = graph.n
    A = graph.matrix()
    A.data[:] = 1.0
    deg = np.asarray(A.sum(axis=1)).ravel()
    P = csr_matrix(A.multiply(1.0 / np.maximum(deg, 1.0)[:, None]))
    m = [np.ones(n, dtype=bool) if c is None else _mask(c, Tree(graph.nodes, graph.edges, graph.weights))
         for c in (e0, e1)]
    ends = [a, b]
    for r in range(rounds):
        moving = r % 2
        target = ends[1 - moving]
        free = np.ones(n, dtype=bool)
        free[target] = False
        idx = np.flatnonzero(free)
        sub = P[idx][:, idx]
        h = np.zeros(n)
        h[idx] = spsolve((identity(len(idx), format="csc") - sub.tocsc()), np.ones(len(idx)))
        h[~m[moving]] = -np.inf
        best = int(np.argmax(h))
        if best == ends[moving] and r > 0:
            break
        ends[moving] = best
    return ends[0], ends[1]


# -- relaxation -------------------------------------------------------------------


def _path_length(v: np.ndarray, closed: bool) -> float:
    w = np.vstack([v, v[:1]]) if closed else v
    return float(np.hypot(*np.diff(w, axis=0).T).sum())


def relax(vertices, inside: Callable[[np.ndarray], np.ndarray], threshold: float, closed: bool = False,
          max_iter: int = RELAX_ITERS) -> tuple[np.ndarray, int, list[float]]:
    """Pull each vertex toward its neighbours' midpoint as far as the region allows.

    Vertices are updated in alternating colour classes, so each move only
    changes its own two edges and the length never increases. Each move is
    the farthest admissible point on the segment to the midpoint, found by 8
    bisection steps. Stops when the largest displacement is below
    ``threshold`` or after ``max_iter`` sweeps. Returns (vertices, sweeps,
    length history).
    """
    v = np.array(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return v, 0, [_path_length(v, closed)]
    idx = np.arange(n) if closed else np.arange(1, n - 1)
    if closed:
        classes = [idx[(idx % 2 == 0) & (idx < n - n % 2)], idx[idx % 2 == 1]]
        if n % 2:
            classes.append(np.array([n - 1]))
    else:
        classes = [idx[idx % 2 == 1], idx[idx % 2 == 0]]
    history = [_path_length(v, closed)]
    it = 0
    for it in range(1, max_iter + 1):
        moved = 0.0
        for cls in classes:
            if cls.size == 0:
                continue
            prev_v = v[(cls - 1) % n]
            next_v = v[(cls + 1) % n]
            cur = v[cls]
            target = 0.5 * (prev_v + next_v)
            t = np.zeros(len(cls))
            full = inside(target)
            t[full] = 1.0
            rest = np.flatnonzero(~full)
            if rest.size:
                lo = np.zeros(rest.size)
                hi = np.ones(rest.size)
                for _ in range(BISECT_STEPS):
                    mid = 0.5 * (lo + hi)
                    ok = inside(cur[rest] + mid[:, None] * (target[rest] - cur[rest]))
                    lo = np.where(ok, mid, lo)
                    hi = np.where(ok, hi, mid)
                t[rest] = lo
            new = cur + t[:, None] * (target - cur)
            moved = max(moved, float(np.hypot(*(new - cur).T).max()))
            v[cls] = new
        history.append(_path_length(v, closed))
        if moved < threshold:
            break
    return v, it, history


# -- dispatch -------------------------------------------------------------------------


@dataclass(frozen=True)
class CutRegion:
    """Region nodes within ``radius + eta_gap`` of the ridge point: the cut used to open a closed band."""

    center: np.ndarray
    radius: float
    eta_gap: float

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.hypot(*(p - self.center).T) <= self.radius + self.eta_gap


@dataclass(eq=False)
class ExtractedCurve:
    path: Polyline
    topology: str
    endpoints: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def vertices(self) -> np.ndarray:
        return self.path.vertices


@dataclass
class ExtractParams:
    xi: float | None = None
    eta_gap: float | None = None
    cut_radius: float = CUT_RADIUS
    relax: bool = True
    relax_threshold: float | None = None
    hitting_time: bool = False
    metric: str = "net"
    hole_point: tuple[float, float] | None = None
    min_component: int = 3


def _largest_component(g: NetGraph) -> NetGraph:
    lab = g.components()
    if lab.max(initial=0) == 0:
        return g
    sizes = np.bincount(lab)
    keep = lab == int(np.argmax(sizes))
    log.warning("net has %d components; keeping the largest (%d of %d nodes)", len(sizes), keep.sum(), g.n)
    return g.subgraph(keep)


def _dedupe(v: np.ndarray, closed: bool) -> np.ndarray:
    keep = np.ones(len(v), dtype=bool)
    keep[1:] = np.hypot(*np.diff(v, axis=0).T) > 1e-14
    v = v[keep]
    if closed and len(v) > 2 and math.hypot(*(v[0] - v[-1])) <= 1e-14:
        v = v[:-1]
    return v


def _open_path(g: NetGraph, p: ExtractParams, e0=None, e1=None):
    """Endpoints and the node path joining them.

    With ``metric="tree"`` both come from the spanning tree. The default
    ``"net"`` measures path lengths on the net graph itself, which tracks
    lengths of paths inside the region; the spanning tree is still built and
    certifies connectivity.
    """
    tree = mst(g)
    space = tree if p.metric == "tree" else g
    a, b = max_min_endpoints(space, e0, e1)
    if p.hitting_time:
        a, b = hitting_refine(g, a, b, e0, e1)
    nodes = shortest_path(space, a, b)
    return space, a, b, nodes


def _join_through_cut(region, cut: CutRegion, gcut: NetGraph, a_pt, b_pt) -> np.ndarray:
    """Interior vertices of a path from a_pt to b_pt inside the cut: empty for a straight join."""
    L = math.hypot(*(b_pt - a_pt))
    k = max(2, int(math.ceil(L / max(cut.eta_gap / 2, 1e-12))) + 1)
    seg = a_pt + np.linspace(0.0, 1.0, k)[:, None] * (b_pt - a_pt)
    if np.all(region.contains(seg[1:-1]) & cut.contains(seg[1:-1])) if k > 2 else True:
        return np.zeros((0, 2))
    pts = np.vstack([a_pt, b_pt, gcut.nodes])
    g = net_from_points(pts, gcut.xi * 0.999, gcut.link)
    lab = g.components()
    if lab[0] != lab[1]:
        return np.zeros((0, 2))
    nodes = shortest_path(g, 0, 1)
    return g.nodes[nodes[1:-1]]


def _winding(v: np.ndarray, hole) -> int | None:
    if hole is None or len(v) < 3:
        return None
    try:
        return winding_number(Polyline(v, True), hole)
    except Exception:  # the point lies on the curve
        return None


def _finish(region, v: np.ndarray, closed: bool, p: ExtractParams, diag: dict, fixed_ends=True) -> ExtractedCurve:
    v = _dedupe(v, closed)
    diag["length_before_relax"] = _path_length(v, closed)
    if p.relax and len(v) >= 3:
        thr = p.relax_threshold if p.relax_threshold is not None else 1e-3 * region.grid_step
        v, iters, hist = relax(v, region.contains, thr, closed)
        diag["relax_iterations"] = iters
        diag["relax_history"] = hist
        v = _dedupe(v, closed)
    diag["length"] = _path_length(v, closed)
    poly = Polyline(v, closed)
    topo = "closed" if closed else "open"
    if closed:
        diag["simple"] = bool(polyline_is_simple(poly))
        diag["winding"] = _winding(v, p.hole_point if p.hole_point is not None else v.mean(axis=0))
    ends = None if closed else np.vstack([v[0], v[-1]])
    return ExtractedCurve(poly, topo, ends, diag)


def _cut(region, graph: NetGraph, p: ExtractParams, y_hat=None):
    eps = region.epsilon
    eta = GAP_FRACTION * eps if p.eta_gap is None else p.eta_gap
    center = np.asarray(region.y_hat if y_hat is None else y_hat, dtype=float)
    cut = CutRegion(center, p.cut_radius * eps, eta)
    in_cut = cut.contains(graph.nodes)
    rest = graph.subgraph(~in_cut)
    gcut = graph.subgraph(in_cut)
    # shell: remaining nodes linked to a cut node
    e = graph.edges
    touch = np.zeros(graph.n, dtype=bool)
    cross = in_cut[e[:, 0]] != in_cut[e[:, 1]]
    touch[e[cross].ravel()] = True
    shell = touch[~in_cut]
    return cut, rest, gcut, shell


def _significant_components(g: NetGraph, min_size: int) -> tuple[np.ndarray, list[int]]:
    lab = g.components()
    sizes = np.bincount(lab) if len(lab) else np.zeros(0, dtype=np.int64)
    big = [int(k) for k in np.argsort(-sizes, kind="stable") if sizes[k] >= min_size]
    return lab, big


def extract_curve(region, mode: str = "open", params: ExtractParams | None = None, y_hat=None) -> ExtractedCurve:
    """Extract a polyline from an EDT region.

    ``mode`` is ``open``, ``closed`` or ``general``; general decides between the
    other two by counting the pieces left after cutting near the ridge point.
    """
    p = params or ExtractParams()
    if len(region.region_points) == 0:
        raise ExtractionError("empty region")
    graph = build_net(region, p.xi)
    graph = _largest_component(graph)
    diag: dict = {"mode": mode, "n_nodes": graph.n, "xi": graph.xi}
    if mode == "open":
        tree, a, b, nodes = _open_path(graph, p)
        diag["endpoint_path_length"] = float(tree_distances(tree, a)[0, b])
        return _finish(region, graph.nodes[nodes], False, p, diag)
    if mode not in ("closed", "general"):
        raise ValueError(f"unknown extraction mode {mode!r}")
    cut, rest, gcut, shell = _cut(region, graph, p, y_hat)
    lab, big = _significant_components(rest, p.min_component)
    diag["components_after_cut"] = len(big)
    if mode == "general" and len(big) not in (1, 2):
        raise ExtractionError(f"unexpected topology: {len(big)} components after the cut")
    if mode == "closed" or len(big) == 1:
        if not big:
            raise ExtractionError("nothing left after the cut")
        keep = lab == big[0]
        sub = rest.subgraph(keep)
        sh = shell[keep]
        if not sh.any():
            raise ExtractionError("cut shell is empty")
        tree, a, b, nodes = _open_path(sub, p, sh, sh)
        pa, pb = sub.nodes[a], sub.nodes[b]
        bridge = _join_through_cut(region, cut, gcut, pb, pa)
        v = np.vstack([sub.nodes[nodes], bridge])
        diag["endpoints_on_cut"] = np.vstack([pa, pb]).tolist()
        return _finish(region, v, True, p, diag)
    pieces = []
    for k in big:
        keep = lab == k
        sub = rest.subgraph(keep)
        sh = shell[keep]
        if not sh.any():
            raise ExtractionError("cut shell is empty")
        tree, a, b, nodes = _open_path(sub, p, None, sh)
        pieces.append(sub.nodes[nodes])
    first, second = pieces
    bridge = _join_through_cut(region, cut, gcut, first[-1], second[-1])
    v = np.vstack([first, bridge, second[::-1]])
    return _finish(region, v, False, p, diag)
