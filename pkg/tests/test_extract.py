import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import minimum_spanning_tree

from filament_lab import edt, evaluate as ev, extract as ext
from filament_lab.geom import Polyline
from filament_lab.model import SupportModel, build_curve


def graph(points, edges):
    pts = np.asarray(points, dtype=float)
    e = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
    w = np.hypot(*(pts[e[:, 0]] - pts[e[:, 1]]).T)
    return ext.NetGraph(pts, e, w, 1.0, 2.5)


def exact_region(family, params, sigma, eps):
    c = build_curve(family, params)
    y = c.eval([0.3])[0]
    return c, y, edt.edt_region(SupportModel(c, sigma), sigma_hat=sigma, y_hat=y, epsilon=eps)


def test_single_point_net():
    g = ext.net_from_points([[0.2, 0.3]], 0.1)
    assert g.n == 1 and len(g.edges) == 0


def test_net_spacing_collinear():
    xi = 0.1
    pts = np.column_stack([np.arange(0, 2, xi / 2), np.zeros(40)])
    g = ext.net_from_points(pts, xi)
    d = np.hypot(*(g.nodes[:, None] - g.nodes[None]).transpose(2, 0, 1))
    d[np.diag_indices(g.n)] = np.inf
    assert d.min() >= xi - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=60), st.floats(0.02, 0.3))
def test_net_is_maximal_and_separated(pts, xi):
    pts = np.array(pts)
    keep = ext.greedy_net(pts, xi)
    nodes = pts[keep]
    d = np.hypot(*(nodes[:, None] - nodes[None]).transpose(2, 0, 1))
    d[np.diag_indices(len(nodes))] = np.inf
    assert d.min() >= xi or len(nodes) == 1
    # every input point is within xi of some node
    assert np.hypot(*(pts[:, None] - nodes[None]).transpose(2, 0, 1)).min(1).max() < xi + 1e-12


def test_annulus_net_connected():
    _, _, r = exact_region("circle", {"radius": 1.0}, 0.2, 0.05)
    g = ext.build_net(r)
    assert len(set(g.components().tolist())) == 1


def test_build_net_rejects_large_xi():
    _, _, r = exact_region("circle", {"radius": 1.0}, 0.2, 0.05)
    with pytest.raises(ValueError):
        ext.build_net(r, xi=0.05)


def test_mst_triangle():
    g = graph([[0, 0], [3, 0], [0, 4]], [[0, 1], [0, 2], [1, 2]])
    t = ext.mst(g)
    assert t.total_weight == pytest.approx(7.0)


def test_mst_path_graph():
    pts = np.column_stack([np.arange(6.0), np.zeros(6)])
    edges = [[i, i + 1] for i in range(5)]
    t = ext.mst(graph(pts, edges))
    assert sorted(map(tuple, t.edges.tolist())) == [tuple(e) for e in edges]


def test_mst_random_vs_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pts = rng.random((30, 2))
        edges = list(itertools.combinations(range(30), 2))
        g = graph(pts, edges)
        ref = minimum_spanning_tree(g.matrix()).sum()
        assert ext.mst(g).total_weight == pytest.approx(ref, rel=1e-12)


def test_mst_disconnected():
    with pytest.raises(ext.ExtractionError, match="not connected"):
        ext.mst(graph([[0, 0], [1, 0], [5, 5]], [[0, 1]]))


def test_endpoints_on_segment():
    pts = np.column_stack([np.linspace(0, 10, 21), np.zeros(21)])
    rng = np.random.default_rng(1)
    perm = rng.permutation(21)
    pts = pts[perm]
    g = ext.net_from_points(pts, 0.4, link=0.6)
    a, b = ext.max_min_endpoints(ext.mst(g))
    assert sorted([g.nodes[a, 0], g.nodes[b, 0]]) == [0.0, 10.0]


def test_endpoints_star():
    pts = [[0, 0], [1, 0], [0, 1], [0, 2], [-1, 0], [-2, 0], [-3, 0]]
    edges = [[0, 1], [0, 2], [2, 3], [0, 4], [4, 5], [5, 6]]
    a, b = ext.max_min_endpoints(ext.mst(graph(pts, edges)))
    assert {a, b} == {3, 6}


def test_endpoints_constrained():
    pts = np.column_stack([np.linspace(0, 10, 11), np.zeros(11)])
    g = ext.net_from_points(pts, 0.5, link=1.5)
    a, b = ext.max_min_endpoints(g, e0=lambda p: p[:, 0] < 3, e1=lambda p: p[:, 0] > 8)
    assert g.nodes[a, 0] == 0.0 and g.nodes[b, 0] == 10.0


def test_shortest_path_whole_path():
    pts = np.column_stack([np.arange(5.0), np.zeros(5)])
    g = graph(pts, [[i, i + 1] for i in range(4)])
    assert ext.shortest_path(g, 0, 4).tolist() == [0, 1, 2, 3, 4]


def test_shortest_path_degenerate():
    g = graph([[0, 0], [1, 0]], [[0, 1]])
    with pytest.raises(ext.ExtractionError, match="degenerate"):
        ext.shortest_path(g, 1, 1)


def _brute_shortest(n, adj, a, b):
    best = math.inf

    def dfs(u, seen, length):
        nonlocal best
        if length >= best:
            return
        if u == b:
            best = length
            return
        for v, w in adj[u]:
            if v not in seen:
                dfs(v, seen | {v}, length + w)

    dfs(a, {a}, 0.0)
    return best


def test_shortest_path_vs_exhaustive():
    rng = np.random.default_rng(2)
    for _ in range(40):
        n = int(rng.integers(3, 11))
        pts = rng.random((n, 2))
        pairs = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.5]
        pairs += [(i, i + 1) for i in range(n - 1)]
        g = graph(pts, sorted(set(pairs)))
        path = ext.shortest_path(g, 0, n - 1)
        length = np.hypot(*np.diff(g.nodes[path], axis=0).T).sum()
        adj = ext.Tree(g.nodes, g.edges, g.weights).adjacency()
        assert length == pytest.approx(_brute_shortest(n, adj, 0, n - 1), rel=1e-12)


def test_relax_straight_path_fixed():
    v = np.column_stack([np.linspace(0, 1, 11), np.zeros(11)])
    out, iters, hist = ext.relax(v, lambda p: np.ones(len(p), dtype=bool), 1e-9)
    assert np.allclose(out, v, atol=1e-12)
    assert iters == 1


def test_relax_zigzag_length_decreases():
    x = np.linspace(0, 1, 21)
    v = np.column_stack([x, 0.05 * (-1) ** np.arange(21)])
    inside = lambda p: np.abs(p[:, 1]) <= 0.2
    out, iters, hist = ext.relax(v, inside, 1e-6)
    diffs = np.diff(hist)
    assert np.all(diffs[:-1] < 0)
    assert hist[-1] < hist[0]
    assert np.all(inside(out))


def test_relax_band_approaches_centerline():
    # short arc of the annulus band: the chord stays within 0.02 of the centerline
    rng = np.random.default_rng(3)
    t = np.linspace(0, 0.4, 60)
    r = 1 + np.r_[0.0, rng.uniform(-0.08, 0.08, 58), 0.0]
    v = np.column_stack([r * np.cos(t), r * np.sin(t)])
    inside = lambda p: np.abs(np.hypot(*p.T) - 1) <= 0.1
    tt = np.linspace(0, 0.4, 4001)
    centerline = np.column_stack([np.cos(tt), np.sin(tt)])
    before = Polyline(v).distance(centerline).max()
    before = max(before, np.abs(np.hypot(*v.T) - 1).max())
    out, _, _ = ext.relax(v, inside, 1e-7)
    after = max(Polyline(out).distance(centerline).max(), np.abs(np.hypot(*out.T) - 1).max())
    assert after < before
    assert after <= 1 - math.cos(0.2) + 1e-3


def test_extract_exact_annulus():
    eps = 0.05
    c, y, r = exact_region("circle", {"radius": 1.0}, 0.2, eps)
    out = ext.extract_curve(r, "closed", ext.ExtractParams(hole_point=(0.0, 0.0)), y_hat=y)
    assert out.topology == "closed"
    assert abs(out.diagnostics["winding"]) == 1
    assert out.diagnostics["simple"]
    assert ev.hausdorff_report(c, out.path, eps / 20)["dh"] <= 4 * eps


def test_extract_exact_stadium():
    eps = 0.05
    c, y, r = exact_region("segment", {"start": [-1, 0], "end": [1, 0]}, 0.2, eps)
    out = ext.extract_curve(r, "open")
    assert out.topology == "open"
    assert ev.hausdorff_report(c, out.path, eps / 20)["dh"] <= 16 * eps


def test_general_mode_matches_dedicated():
    eps = 0.05
    for fam, params, topo in [("circle", {"radius": 1.0}, "closed"),
                              ("segment", {"start": [-1, 0], "end": [1, 0]}, "open")]:
        c, y, r = exact_region(fam, params, 0.2, eps)
        out = ext.extract_curve(r, "general", ext.ExtractParams(hole_point=(0.0, 0.0)), y_hat=y)
        assert out.topology == topo


def test_hitting_refine_on_path():
    pts = np.column_stack([np.linspace(0, 1, 15), np.zeros(15)])
    g = ext.net_from_points(pts, 0.05, link=0.1)
    a, b = ext.hitting_refine(g, 5, 9)
    assert {a, b} == {0, 14}


def test_unknown_mode():
    _, y, r = exact_region("circle", {"radius": 1.0}, 0.2, 0.05)
    with pytest.raises(ValueError):
        ext.extract_curve(r, "spiral")
