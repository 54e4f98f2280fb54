import math

import numpy as np
import pytest
from scipy import special

from filament_lab import model
from filament_lab.model import ModelError, SupportModel, build_curve


def test_circle_length():
    c = build_curve("circle", {"radius": 1.0}, m=256)
    assert c.closed and c.topology == "closed"
    assert c.length == pytest.approx(2 * math.pi, abs=1e-4)


def test_segment_length():
    c = build_curve("segment", {"start": [0, 0], "end": [1, 0]})
    assert not c.closed
    assert c.length == pytest.approx(1.0, abs=1e-12)


def test_ellipse_perimeter_vs_elliptic_integral():
    c = build_curve("ellipse", {"a": 2.0, "b": 1.0})
    # perimeter = 4 a E(m), m = 1 - b^2/a^2
    assert c.length == pytest.approx(4 * 2.0 * special.ellipe(1 - 0.25), abs=1e-4)


def test_unknown_family():
    with pytest.raises(ModelError):
        build_curve("trefoil")


def test_equal_chord_vertices():
    c = build_curve("sine-arc", {"amplitude": 0.2}, m=128)
    chords = np.hypot(*np.diff(c.vertices, axis=0).T)
    assert chords.max() - chords.min() < 1e-9 * c.length


def test_eval_is_on_curve_and_arclength():
    c = build_curve("ellipse", {"a": 2.0, "b": 1.0})
    u = np.linspace(0, 1, 2001)
    p = c.eval(u)
    assert np.allclose((p[:, 0] / 2) ** 2 + p[:, 1] ** 2, 1.0, atol=1e-12)
    steps = np.hypot(*np.diff(p, axis=0).T)
    # uniform arclength: equal steps up to chord/arc discrepancy
    assert steps.max() / steps.min() < 1.001


def test_thickness_circle():
    assert build_curve("circle", {"radius": 1.0}).thickness().delta == pytest.approx(1.0, abs=1e-3)


def test_thickness_segment_sentinel():
    assert build_curve("segment").thickness().delta == model.INF_THICKNESS


def test_thickness_ellipse_vs_brute_force():
    c = build_curve("ellipse", {"a": 2.0, "b": 1.0})
    delta = c.thickness().delta
    assert delta == pytest.approx(0.5, abs=1e-2)
    u = np.linspace(0, 1, 200, endpoint=False)
    pts = c.eval(u)
    brute = min(
        model._circumradius(pts[i], pts[j], pts[k])
        for i in range(0, 200, 7) for j in range(i + 1, 200, 5) for k in range(j + 1, 200, 3)
    )
    assert delta <= brute + 1e-9


def test_triples_min_radius_matches_loop():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(25, 2))
    best, (i, j, k) = model.triples_min_radius(pts)
    loop = min(model._circumradius(pts[a], pts[b], pts[c])
               for a in range(25) for b in range(a + 1, 25) for c in range(b + 1, 25))
    assert best == pytest.approx(float(loop), rel=1e-12)


def test_edt_annulus():
    m = SupportModel(build_curve("circle", {"radius": 1.0}), 0.2)
    assert m.edt(np.array([[1.1, 0.0]]))[0] == pytest.approx(0.1)
    assert m.edt(np.array([[0.0, 1.0]]))[0] == pytest.approx(0.2)


def test_edt_identity_and_dense_boundary_oracle():
    c = build_curve("sine-arc", {"amplitude": 0.15})
    m = SupportModel(c, 0.1)
    rng = np.random.default_rng(1)
    u = rng.random(300)
    y = c.eval(u) + (rng.random((300, 1)) * 0.09) * c.normal(u)
    lam = m.edt(y)
    assert np.allclose(lam, 0.1 - c.distance(y), atol=1e-6)
    bd = m.boundary_samples(2e-4)
    from scipy.spatial import cKDTree

    oracle = cKDTree(bd).query(y)[0]
    assert np.all(np.abs(lam - oracle) < 2e-4)


def test_contains():
    c = build_curve("circle", {"radius": 1.0})
    m = SupportModel(c, 0.2)
    assert m.contains(c.eval([0.5]))[0]
    assert not m.contains(np.array([[0.0, 0.0]]))[0]
    rng = np.random.default_rng(2)
    y = rng.uniform(-1.4, 1.4, (1000, 2))
    t = np.linspace(0, 2 * math.pi, 100000, endpoint=False)
    dense = np.column_stack([np.cos(t), np.sin(t)])
    from scipy.spatial import cKDTree

    brute = cKDTree(dense).query(y)[0] <= 0.2
    got = m.contains(y)
    # disagreement only possible within the oracle's sampling error of the boundary
    near = np.abs(np.abs(np.hypot(*y.T) - 1) - 0.2) < 1e-8
    assert np.all((got == brute) | near)


def test_thickness_violation_rejected():
    with pytest.raises(ModelError):
        SupportModel(build_curve("circle", {"radius": 1.0}), 1.2)


def test_open_curve_endpoint_separation_enforced():
    with pytest.raises(ModelError):
        SupportModel(build_curve("segment", {"start": [0, 0], "end": [0.3, 0]}), 0.2)


def test_boundary_elements_circle_exact():
    m = SupportModel(build_curve("circle", {"radius": 1.0}), 0.2)
    outer, inner = m.boundary_elements()
    assert outer.lengths.sum() == pytest.approx(2 * math.pi * 1.2)
    assert inner.lengths.sum() == pytest.approx(2 * math.pi * 0.8)


def test_curve_from_config():
    c = model.curve_from_config({"family": "spiral", "params": {"r0": 0.3, "growth": 0.05}})
    assert c.family == "spiral" and not c.closed
    with pytest.raises(ModelError):
        model.curve_from_config({"params": {}})
