"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned from the acceptance table; nothing here is loosened to make a
run pass. Seeds are fixed so the whole suite is reproducible.
"""

import heapq
import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from filament_lab import edt, evaluate as ev, extract as ext, geom, medial as med, pipeline as P, support
from filament_lab.declutter import fit as fit_declutter
from filament_lab.model import SupportModel, build_curve
from filament_lab.sampler import NoiseSpec, SamplerConfig, sample, sample_counts

N_QUALIFYING = 20
MAX_SEEDS = 60

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


# -- shared runs: closed circle R=1, sigma=0.2, beta=0, n=4000, nn-max epsilon ------------------------


@pytest.fixture(scope="module")
def circle_runs():
    """First 20 seeds whose measured boundary error is at most epsilon, with per-run measurements."""
    curve = build_curve("circle", {"radius": 1.0})
    truth = SupportModel(curve, 0.2)
    runs, skipped = [], []
    t0 = time.time()
    seed = 0
    while len(runs) < N_QUALIFYING and seed < MAX_SEEDS:
        data = sample(SamplerConfig([curve], NoiseSpec(0.2, 0.0), 4000, seed=seed))
        sup = support.estimate_support(data.points)
        eps = sup.epsilon
        bh = ev.boundary_hausdorff(truth, sup)["dh"]
        if bh > eps:
            skipped.append(seed)
            seed += 1
            continue
        region = edt.edt_region(sup)  # delta = 2 eps, grid eps/4
        run = {"seed": seed, "eps": eps, "bh": bh, "sup": sup, "region": region}
        try:
            run["medial"] = med.medial_fit(med.split_closed(sup.arrangement), eps / 4)
        except med.SplitError as exc:
            run["medial_error"] = str(exc)
        runs.append(run)
        seed += 1
    return {"curve": curve, "runs": runs, "skipped": skipped, "seconds": time.time() - t0}


def test_criterion_1_edt_sandwich(circle_runs, verdict):
    curve, runs = circle_runs["curve"], circle_runs["runs"]
    violations = 0
    worst_in, worst_out = 0.0, 0.0
    for r in runs:
        eps, reg = r["eps"], r["region"]
        tol = eps / 4
        # curve inside the region: every curve sample has a region grid point within eps/4
        d_in = cKDTree(reg.region_points).query(curve.sample(eps / 4))[0]
        # region inside the 4 eps tube around the curve
        d_out = curve.distance(reg.region_points)
        violations += int(np.sum(d_in > tol)) + int(np.sum(d_out > 4 * eps + tol))
        worst_in = max(worst_in, float(d_in.max() / eps))
        worst_out = max(worst_out, float(d_out.max() / eps))
    ok = len(runs) == N_QUALIFYING and violations == 0 and circle_runs["seconds"] < 120
    verdict(1, ok, f"{len(runs)} qualifying runs (skipped seeds {circle_runs['skipped']}), violations={violations}, "
                   f"max gap curve->region {worst_in:.3f} eps, region->curve {worst_out:.3f} eps, "
                   f"{circle_runs['seconds']:.0f}s")
    assert ok


def test_criterion_2_noise_level(circle_runs, verdict):
    curve, runs = circle_runs["curve"], circle_runs["runs"]
    bad = []
    ratio_s, ratio_y = 0.0, 0.0
    for r in runs:
        reg, bh = r["region"], r["bh"]
        ds = abs(reg.sigma_hat - 0.2)
        dy = float(curve.distance(reg.y_hat[None, :])[0])
        ratio_s, ratio_y = max(ratio_s, ds / bh), max(ratio_y, dy / bh)
        if ds > bh or dy > 2 * bh:
            bad.append(r["seed"])
    ok = not bad and len(runs) == N_QUALIFYING
    verdict(2, ok, f"max |sigma_hat - sigma|/d_H = {ratio_s:.3f} (<= 1), max d(y_hat, curve)/d_H = {ratio_y:.3f} (<= 2), "
                   f"failing seeds {bad}")
    assert ok


def test_criterion_3_medial_two_eps(circle_runs, verdict):
    curve, runs = circle_runs["curve"], circle_runs["runs"]
    good, worst, errors = 0, 0.0, []
    for r in runs:
        if "medial" not in r:
            errors.append((r["seed"], r["medial_error"]))
            continue
        d = float(curve.distance(r["medial"].midpoints).max())
        worst = max(worst, d / r["bh"])
        good += d <= 2 * r["bh"]
    ok = good == N_QUALIFYING
    verdict(3, ok, f"{good}/{len(runs)} runs with every midpoint within 2 d_H (worst {worst:.3f} d_H), "
                   f"split errors {errors}")
    assert ok


# -- criterion 4: completion versus raw midpoints ------------------------------------------------------


def test_criterion_4_completion_rate(verdict):
    grid = [500, 2000, 8000, 32000]
    reps = 20
    curve = build_curve("circle", {"radius": 1.0})
    t0 = time.time()
    raw_med, comp_med, fail = [], [], []
    for n in grid:
        raw, comp = [], []
        for s in range(reps):
            data = sample(SamplerConfig([curve], NoiseSpec(0.2, 0.0), n, seed=s))
            sup = support.estimate_support(data.points)
            spacing = sup.epsilon / 20
            try:
                fit = med.medial_fit(med.split_closed(sup.arrangement), sup.epsilon / 4)
            except med.SplitError:
                raw.append(np.nan)
                comp.append(np.nan)
                continue
            raw.append(ev.hausdorff_report(curve, fit.midpoints, spacing)["truth_to_est"])
            comp.append(ev.hausdorff_report(curve, med.complete(fit), spacing)["dh"])
        fail.append(int(np.isnan(raw).sum()))
        raw_med.append(np.nanmedian(raw))
        comp_med.append(np.nanmedian(comp))
    a = ev.rate_report(grid, raw_med, 0.5, reps)
    b = ev.rate_report(grid, comp_med, 0.5, reps)
    gap = b.fitted_slope - a.fitted_slope
    secs = time.time() - t0
    ok = gap >= 0.15 and secs < 1800 and max(fail) <= 0.2 * reps
    verdict(4, ok, f"completed slope {b.fitted_slope:.3f}, raw coverage slope {a.fitted_slope:.3f}, "
                   f"difference {gap:.3f} (>= 0.15), split failures per n {fail}, {secs:.0f}s")
    assert ok


# -- criterion 5: EDT-extracted curve rate -------------------------------------------------------------


@pytest.mark.parametrize("beta,lo,hi", [(0.0, 0.28, 0.52), (1.0, 0.17, 0.40)])
def test_criterion_5_rate_slope(beta, lo, hi, verdict):
    cfg = P.merge_config({"noise": {"sigma": 0.2, "beta": beta}, "extract": {"mode": "closed"},
                          "eval": {"n_grid": [500, 2000, 8000, 32000], "replications": 10}})
    t0 = time.time()
    rep = P.rate_experiment(cfg, workers=None)
    ok = lo <= rep.fitted_slope <= hi
    verdict(5, ok, f"beta={beta:g}: slope {rep.fitted_slope:.3f} in [{lo}, {hi}] (theory {rep.theoretical_slope:.3f}), "
                   f"medians {np.round(rep.dh_values, 4).tolist()}, failures {rep.failures}, {time.time() - t0:.0f}s")
    assert ok


# -- criterion 6: extraction bounds --------------------------------------------------------------------


def _exact_extraction(family, params, sigma, eps, mode, hole=None):
    curve = build_curve(family, params)
    fld = SupportModel(curve, sigma)
    y = curve.eval([0.3])[0]
    region = edt.edt_region(fld, sigma_hat=sigma, y_hat=y, epsilon=eps)
    out = ext.extract_curve(region, mode, ext.ExtractParams(hole_point=hole), y_hat=y)
    return ev.hausdorff_report(curve, out.path, eps / 20)["dh"]


def test_criterion_6_extraction_bounds(verdict):
    details, ok = [], True
    for eps in (0.05, 0.03):
        d = _exact_extraction("circle", {"radius": 1.0}, 0.2, eps, "closed", (0.0, 0.0))
        ok &= d <= 4 * eps
        details.append(f"annulus eps={eps}: {d / eps:.2f} eps")
        d = _exact_extraction("segment", {"start": [-1.0, 0.0], "end": [1.0, 0.0]}, 0.2, eps, "open")
        ok &= d <= 16 * eps
        details.append(f"stadium eps={eps}: {d / eps:.2f} eps")

    # simulated data, bounds in units of the measured boundary error
    sims = {"closed": (build_curve("circle", {"radius": 1.0}), 0.2, 4.0),
            "open": (build_curve("sine-arc", {"amplitude": 0.15}), 0.1, 16.0)}
    for mode, (curve, sigma, factor) in sims.items():
        truth = SupportModel(curve, sigma)
        good = 0
        for s in range(20):
            data = sample(SamplerConfig([curve], NoiseSpec(sigma, 0.0), 4000, seed=s))
            sup = support.estimate_support(data.points)
            bh = ev.boundary_hausdorff(truth, sup)["dh"]
            try:
                region = edt.edt_region(sup)
                c = ext.extract_curve(region, mode, ext.ExtractParams(hole_point=P.hole_point(sup)))
            except (ext.ExtractionError, edt.EdtError):
                continue
            good += ev.hausdorff_report(curve, c.path, sup.epsilon / 20)["dh"] <= factor * bh
        ok &= good >= 18
        details.append(f"simulated {mode}: {good}/20 within {factor:g} d_H")
    verdict(6, ok, "; ".join(details))
    assert ok


# -- criterion 7: decluttering -------------------------------------------------------------------------


def test_criterion_7_declutter(verdict):
    cfg = P.example_config(1)
    curves = P.curves_of(cfg)
    noise = P.noise_of(cfg)
    good, fr, cr = 0, [], []
    for s in range(20):
        data = sample_counts(curves, noise, [500, 500], 500, (-1.0, -1.0, 1.0, 1.0), seed=s)
        keep = fit_declutter(data.points, (-1.0, -1.0, 1.0, 1.0)).classify(data.points)
        cm = ev.confusion(data.labels, keep)
        fr.append(cm.filament_recall)
        cr.append(cm.clutter_recall)
        good += cm.filament_recall >= 0.95 and cm.clutter_recall >= 0.75
    ok = good >= 18
    verdict(7, ok, f"{good}/20 runs with filament recall >= 0.95 and clutter recall >= 0.75; "
                   f"filament recall {min(fr):.3f}-{max(fr):.3f}, clutter recall {min(cr):.3f}-{max(cr):.3f}")
    assert ok


# -- criterion 8: geometry oracle suite ----------------------------------------------------------------


def _arc_distance_oracle(p, row):
    """Dense sampling of the arc, then a finer resampling around the best coarse sample."""
    cx, cy, r, a0, sp = row
    t = a0 + sp * np.linspace(0.0, 1.0, 4097)
    d = np.hypot(cx + r * np.cos(t) - p[0], cy + r * np.sin(t) - p[1])
    k = int(np.argmin(d))
    lo, hi = t[max(k - 2, 0)], t[min(k + 2, len(t) - 1)]
    tf = np.linspace(lo, hi, 20001)
    return float(np.hypot(cx + r * np.cos(tf) - p[0], cy + r * np.sin(tf) - p[1]).min())


def _prim_weight_edges(n, edges, w):
    adj = [[] for _ in range(n)]
    for (a, b), x in zip(edges.tolist(), w.tolist()):
        adj[a].append((x, b, a))
        adj[b].append((x, a, b))
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    heap = list(adj[0])
    heapq.heapify(heap)
    out = []
    while heap:
        x, b, a = heapq.heappop(heap)
        if seen[b]:
            continue
        seen[b] = True
        out.append((min(a, b), max(a, b)))
        for item in adj[b]:
            if not seen[item[1]]:
                heapq.heappush(heap, item)
    return sorted(out)


def test_criterion_8_geometry_oracles(verdict):
    rng = np.random.default_rng(8)
    fails = {"arc": 0, "angular": 0, "hausdorff": 0, "mst": 0, "winding": 0}
    trials = 1000

    for _ in range(trials):
        row = [*rng.uniform(-1, 1, 2), rng.uniform(0.05, 1.0), rng.uniform(0, 2 * math.pi), rng.uniform(0.01, 2 * math.pi)]
        p = rng.uniform(-2, 2, 2)
        got = geom.ElementSet.from_arcs([row]).distance(p[None, :])[0]
        fails["arc"] += int(abs(got - _arc_distance_oracle(p, row)) > 1e-5)

    raster = np.linspace(0, 2 * math.pi, 100000, endpoint=False)
    for _ in range(trials):
        k = rng.integers(1, 6)
        pairs = list(zip(rng.uniform(0, 2 * math.pi, k), rng.uniform(0, 2.0, k)))
        comp = geom.subtract_angular_cover(pairs)
        covered = np.zeros(len(raster), dtype=bool)
        for s, L in pairs:
            covered |= np.mod(raster - s, 2 * math.pi) <= L
        free = (~covered).mean() * 2 * math.pi
        fails["angular"] += int(abs(comp.measure - free) > 2 * math.pi * 1e-3)

    for _ in range(trials):
        a = rng.normal(size=(rng.integers(1, 40), 2))
        b = rng.normal(size=(rng.integers(1, 40), 2))
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
        oracle = max(d.min(1).max(), d.min(0).max())
        fails["hausdorff"] += int(geom.hausdorff_distance(a, b) != oracle)

    for _ in range(trials):
        n = int(rng.integers(2, 30))
        pts = rng.uniform(0, 1, (n, 2))
        ij = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64)
        g = ext.NetGraph(pts, ij, np.hypot(*(pts[ij[:, 0]] - pts[ij[:, 1]]).T), 1.0, 2.0)  # complete graph
        tree = ext.mst(g)
        mine = sorted(tuple(sorted(e)) for e in tree.edges.tolist())
        fails["mst"] += mine != _prim_weight_edges(n, g.edges, g.weights)

    for _ in range(trials):
        m = int(rng.integers(3, 12))
        ang = np.sort(rng.uniform(0, 2 * math.pi, m))
        if rng.random() < 0.5:
            ang = ang[::-1]
        v = np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(0.3, 1.0, (m, 1))
        v = np.vstack([v, v]) if rng.random() < 0.3 else v  # sometimes loop twice
        q = rng.uniform(-1.2, 1.2, 2)
        poly = geom.Polyline(v, closed=True)
        if poly.distance(q[None, :])[0] < 1e-9:
            continue
        # angle-sum oracle in plain python
        tot = 0.0
        for i in range(len(v)):
            a0 = math.atan2(v[i][1] - q[1], v[i][0] - q[0])
            a1 = math.atan2(v[(i + 1) % len(v)][1] - q[1], v[(i + 1) % len(v)][0] - q[0])
            da = a1 - a0
            while da > math.pi:
                da -= 2 * math.pi
            while da < -math.pi:
                da += 2 * math.pi
            tot += da
        fails["winding"] += geom.winding_number(poly, q) != round(tot / (2 * math.pi))

    ok = sum(fails.values()) == 0
    verdict(8, ok, f"{trials} checks each, failures {fails}")
    assert ok


# -- criterion 9: open-curve endpoints -----------------------------------------------------------------


def test_criterion_9_open_endpoints(verdict):
    curve = build_curve("sine-arc", {"amplitude": 0.15})
    truth = SupportModel(curve, 0.1)
    f = curve.endpoints()
    qualifying, good, worst, skipped = 0, 0, 0.0, []
    seed = 0
    while qualifying < N_QUALIFYING and seed < MAX_SEEDS:
        data = sample(SamplerConfig([curve], NoiseSpec(0.1, 0.0), 4000, seed=seed))
        sup = support.estimate_support(data.points)
        bh = ev.boundary_hausdorff(truth, sup)["dh"]
        seed += 1
        if bh > sup.epsilon:
            skipped.append(seed - 1)
            continue
        qualifying += 1
        try:
            c = ext.extract_curve(edt.edt_region(sup), "open")
        except (ext.ExtractionError, edt.EdtError):
            continue
        e = c.endpoints
        # match estimated endpoints to true ones in the better of the two pairings
        d = min(max(np.hypot(*(e[0] - f[0])), np.hypot(*(e[1] - f[1]))),
                max(np.hypot(*(e[0] - f[1])), np.hypot(*(e[1] - f[0]))))
        worst = max(worst, d / bh)
        good += d <= 16 * bh
    ok = qualifying == N_QUALIFYING and good == N_QUALIFYING
    verdict(9, ok, f"{good}/{qualifying} qualifying runs with both endpoints within 16 d_H (worst {worst:.2f} d_H), "
                   f"skipped seeds {skipped}")
    assert ok
