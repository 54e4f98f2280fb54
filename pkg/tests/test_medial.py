import math

import numpy as np
import pytest

from filament_lab import edt, evaluate as ev, extract as ext, medial as med, support
from filament_lab.geom import SEGMENT, ElementSet
from filament_lab.model import SupportModel, build_curve
from filament_lab.sampler import NoiseSpec, SamplerConfig, sample


def annulus_arrangement(eps=0.05):
    return support.arrangement_from_loops([ElementSet.from_arcs([[0, 0, 0.8, 0, 2 * math.pi]]),
                                           ElementSet.from_arcs([[0, 0, 1.2, 0, 2 * math.pi]])], eps)


def stadium_arrangement(sigma=0.15, eps=0.01):
    m = SupportModel(build_curve("segment", {"start": [0, 0], "end": [1, 0]}), sigma)
    return support.arrangement_from_loops(m.boundary_elements(), eps)


def test_split_closed_annulus():
    sp = med.split_closed(annulus_arrangement())
    assert sp.closed and sp.provenance == "closed-native"
    assert sp.side0.params[0, 2] == pytest.approx(1.2)
    assert sp.side1.params[0, 2] == pytest.approx(0.8)


def test_split_closed_rejects_one_loop():
    with pytest.raises(med.SplitError, match="not a closed-tube topology"):
        med.split_closed(stadium_arrangement())


def test_split_open_stadium():
    sigma, eps, c = 0.15, 0.01, 1.0
    sp = med.split_open(stadium_arrangement(sigma, eps), [0, 0], [1, 0], sigma, eps, med.EndpointSplitConfig(c))
    R = sigma + c * eps
    expected = 1 - 2 * math.sqrt(R * R - sigma * sigma)
    for side in (sp.side0, sp.side1):
        assert np.all(side.kind == SEGMENT)
        assert side.lengths.sum() == pytest.approx(expected, abs=1e-9)
    ys = sorted([sp.side0.params[0, 1], sp.side1.params[0, 1]])
    assert ys == pytest.approx([-sigma, sigma])
    # the two sides and the two removed completions make up the whole boundary
    total = sum(x.lengths.sum() for x in (sp.side0, sp.side1, *sp.cut_sets))
    assert total == pytest.approx(stadium_arrangement(sigma, eps).loop_lengths[0], abs=1e-9)


def test_split_open_close_endpoints_rejected():
    with pytest.raises(med.SplitError, match="cap separation failed"):
        med.split_open(stadium_arrangement(), [0.4, 0], [0.6, 0], 0.15, 0.01, med.EndpointSplitConfig(1.0))


def test_split_config_validation():
    with pytest.raises(ValueError):
        med.EndpointSplitConfig(0.5)


def test_midpoints_concentric_circles():
    fit = med.medial_fit(med.split_closed(annulus_arrangement()), 0.01)
    assert np.allclose(np.hypot(*fit.midpoints.T), 1.0, atol=1e-6)
    a = np.hypot(*(fit.midpoints - fit.y).T)
    b = np.hypot(*(fit.midpoints - fit.y_near).T)
    assert np.allclose(a, b, rtol=0, atol=1e-12)
    assert len(fit.breakpoints) == 0


def test_completion_concentric_circles():
    spacing = 0.02
    fit = med.medial_fit(med.split_closed(annulus_arrangement()), spacing)
    poly = med.complete(fit)
    assert poly.closed
    t = np.linspace(0, 2 * math.pi, 20000, endpoint=False)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    dh = ev.hausdorff_report(build_curve("circle", {"radius": 1.0}), poly, 1e-3)["dh"]
    assert dh <= spacing ** 2 / 2 + 1e-6
    assert poly.distance(circle).max() <= spacing ** 2 / 2 + 1e-6


def test_completion_bridges_gap():
    x = np.linspace(0, 1, 11)
    mid = np.column_stack([np.r_[x, x + 2], np.zeros(22)])
    fit = med.MedialEstimate(mid, mid, mid, np.array([10]), 0.1, False)
    poly = med.complete(fit)
    steps = np.hypot(*np.diff(poly.vertices, axis=0).T)
    assert np.sum(steps > 0.3) == 1
    assert steps.max() == pytest.approx(1.0)


def test_simulated_closed_midpoints_within_two_eps():
    c = build_curve("circle", {"radius": 1.0})
    d = sample(SamplerConfig([c], NoiseSpec(0.2), 4000, seed=1))
    est = support.estimate_support(d.points)
    bh = ev.boundary_hausdorff(SupportModel(c, 0.2), est)["dh"]
    assert bh < (1.0 - 0.2) / 2
    fit = med.medial_fit(med.split_closed(est.arrangement), est.epsilon / 4)
    assert c.distance(fit.midpoints).max() <= 2 * bh


def test_simulated_open_sides_near_true_boundary():
    c = build_curve("sine-arc", {"amplitude": 0.15})
    truth = SupportModel(c, 0.1)
    d = sample(SamplerConfig([c], NoiseSpec(0.1), 4000, seed=0))
    est = support.estimate_support(d.points)
    r = edt.edt_region(est)
    x = ext.extract_curve(r, "open")
    sp = med.split_open(est.arrangement, x.endpoints[0], x.endpoints[1], r.sigma_hat, est.epsilon,
                        med.EndpointSplitConfig(1.5))
    for side in (sp.side0, sp.side1):
        dist = truth.boundary_distance(side.sample(est.epsilon / 4))
        assert dist.max() <= math.sqrt(est.epsilon)
    fit = med.medial_fit(sp, est.epsilon / 4)
    assert not fit.closed and len(fit) > 10


def test_cap_constants():
    k = med.cap_constants(2.0, 0.01, 0.1, 1.5, 0.5)
    a = math.sqrt((2 * 0.1 * 2 + 4 * 0.01) / (1.5 ** 2 * (1 - 0.2)))
    assert k["a"] == pytest.approx(a)
    assert k["b"] == pytest.approx(a * 1.5 * 1.2)
    assert k["d"] == pytest.approx(1.5 * a)
