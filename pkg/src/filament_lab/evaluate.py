"""Hausdorff reports, rate fitting, confusion counts and the replication harness."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geom import Polyline, directed_hausdorff

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.2


class EvaluationError(RuntimeError):
    pass


# -- Hausdorff ----------------------------------------------------------------


def _estimate_samples(estimate, spacing: float) -> np.ndarray:
    if isinstance(estimate, Polyline):
        return estimate.sample(spacing)
    pts = np.asarray(estimate, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EvaluationError("empty estimate")
    return pts


def _distance_to_estimate(estimate, points) -> np.ndarray:
    if isinstance(estimate, Polyline):
        return estimate.distance(points)
    d, _ = cKDTree(np.asarray(estimate, dtype=float).reshape(-1, 2)).query(points)
    return d


def hausdorff_report(truth, estimate, spacing: float) -> dict:
    """Hausdorff distance between a true curve and an estimate, with both directed parts.

    The estimate is a point set or a :class:`Polyline`. The curve side is
    sampled at ``spacing``; distances onto the curve are exact.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    est = _estimate_samples(estimate, spacing)
    if len(est) == 0:
        raise EvaluationError("empty estimate")
    tpts = truth.sample(spacing)
    t2e = float(_distance_to_estimate(estimate, tpts).max())
    e2t = float(truth.distance(est).max())
    return {"dh": max(t2e, e2t), "truth_to_est": t2e, "est_to_truth": e2t, "spacing": spacing}


def boundary_hausdorff(model, estimate, spacing: float | None = None) -> dict:
    """Hausdorff distance between the true support boundary and an estimated one.

    ``estimate`` is a SupportEstimate (or anything with an ``arrangement``).
    Distances from estimated-boundary samples to the true boundary are exact
    (``|sigma - d(z, curve)|``); the other direction samples the true boundary
    and measures exact distances to the boundary arcs.
    """
    arr = estimate.arrangement
    if spacing is None:
        spacing = arr.epsilon / 10.0
    zs = arr.sample(spacing)
    e2t = float(model.boundary_distance(zs).max())
    bs = model.boundary_samples(spacing)
    t2e = float(arr.elements.distance(bs).max())
    return {"dh": max(t2e, e2t), "truth_to_est": t2e, "est_to_truth": e2t, "spacing": spacing}


# -- rates --------------------------------------------------------------------


def rate_sequence(n, alpha: float) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return (np.log(n) / n) ** (1.0 / (2.0 + alpha))


def loglog_fit(x, y) -> tuple[float, float]:
    """OLS slope and intercept of log y on log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(slope), float(icpt)


@dataclass
class RateReport:
    """Median error per sample size and its log-log regression.

    ``fitted_slope`` regresses log median d_H on log(log n / n) and is compared
    to ``theoretical_slope = 1/(2+alpha)``. ``slope_rn`` is the same fit against
    log r_n, where 1 is the theoretical value.
    """

    n_grid: list[int]
    dh_values: list[float]
    alpha: float
    fitted_slope: float
    intercept: float
    slope_rn: float
    intercept_rn: float
    replications: int
    failures: list[int] = field(default_factory=list)
    raw: list[list[float]] = field(default_factory=list)

    @property
    def theoretical_slope(self) -> float:
        return 1.0 / (2.0 + self.alpha)

    def to_json(self) -> dict:
        out = asdict(self)
        out["theoretical_slope"] = self.theoretical_slope
        return out


def rate_report(n_grid, dh_values, alpha: float, replications: int = 1, failures=None, raw=None) -> RateReport:
    n = np.asarray(n_grid, dtype=float)
    if len(n) < 3:
        raise ValueError("need at least 3 grid points")
    if np.any(np.diff(n) <= 0):
        raise ValueError("n_grid must be strictly increasing")
    s, c = loglog_fit(np.log(n) / n, dh_values)
    s_rn, c_rn = loglog_fit(rate_sequence(n, alpha), dh_values)
    return RateReport([int(v) for v in n_grid], [float(v) for v in dh_values], float(alpha), s, c, s_rn, c_rn,
                      replications, list(failures or [0] * len(n)), [list(map(float, r)) for r in (raw or [])])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FILAMENT_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _run_one(args):
    fn, n, seed = args
    try:
        return float(fn(n, seed)), None
    except Exception as exc:  # a failed replication is counted, not fatal
        return float("nan"), f"{type(exc).__name__}: {exc}"


def replicate(fn: Callable[[int, int], float], n_grid: Sequence[int], reps: int, base_seed: int = 0,
              workers: int | None = None) -> tuple[np.ndarray, list[list[str]]]:
    """Run ``fn(n, seed)`` for every n and seed = base_seed + replicate index.

    Returns an (len(n_grid), reps) array with NaN for failed runs, and the
    error messages per n. Results are ordered by (n, seed) whatever the
    worker count.
    """
    jobs = [(fn, int(n), base_seed + r) for n in n_grid for r in range(reps)]
    workers = _threads() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(_run_one, jobs))
    else:
        res = [_run_one(j) for j in jobs]
    vals = np.array([v for v, _ in res]).reshape(len(n_grid), reps)
    errs = [[e for _, e in res[i * reps:(i + 1) * reps] if e] for i in range(len(n_grid))]
    return vals, errs


def fit_rate(fn: Callable[[int, int], float], n_grid: Sequence[int], alpha: float, reps: int = 10,
             base_seed: int = 0, workers: int | None = None) -> RateReport:
    """Replicate a per-(n, seed) error measurement and fit the log-log slope of the medians."""
    if reps < 10:
        raise ValueError("at least 10 replications per sample size are required")
    vals, errs = replicate(fn, n_grid, reps, base_seed, workers)
    fails = np.isnan(vals).sum(axis=1)
    for n, f, e in zip(n_grid, fails, errs):
        if f > MAX_FAILURE_RATE * reps:
            raise EvaluationError(f"pipeline failed in {f}/{reps} replications at n={n}: {e[:3]}")
    med = np.nanmedian(vals, axis=1)
    return rate_report(n_grid, med, alpha, reps, fails.tolist(), vals.tolist())


# -- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with filament as the positive class."""

    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def filament_recall(self) -> float:
        return self.tp / max(1, self.tp + self.fn)

    @property
    def clutter_recall(self) -> float:
        return self.tn / max(1, self.tn + self.fp)

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def table(self) -> str:
        rows = [
            "true      | filament clutter | total",
            f"filament  | {self.tp:8d} {self.fn:7d} | {self.tp + self.fn:5d}",
            f"clutter   | {self.fp:8d} {self.tn:7d} | {self.fp + self.tn:5d}",
        ]
        return "\n".join(rows)


def confusion(truth, predicted) -> ConfusionMatrix:
    """2x2 counts; labels are booleans or ints where >= 0 means filament."""
    t = np.asarray(truth)
    p = np.asarray(predicted)
    if t.shape != p.shape:
        raise ValueError("label arrays must have equal lengths")
    t = t >= 0 if t.dtype != bool else t
    p = p >= 0 if p.dtype != bool else p
    return ConfusionMatrix(int(np.sum(t & p)), int(np.sum(t & ~p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)))


# -- several filaments --------------------------------------------------------


def well_separated_mask(curves, sigma: float, m: int = 1000) -> list[np.ndarray]:
    """For each curve, which of its ``m`` samples have a 2 sigma ball meeting no other curve."""
    samples = [c.eval(np.linspace(0.0, 1.0, m, endpoint=not c.closed)) for c in curves]
    trees = [cKDTree(s) for s in samples]
    out = []
    for j, s in enumerate(samples):
        ok = np.ones(len(s), dtype=bool)
        for k, t in enumerate(trees):
            if k != j:
                d, _ = t.query(s)
                ok &= d > 2.0 * sigma
        out.append(ok)
    return out


def multi_filament_eval(curves, estimates, sigma: float, spacing: float) -> dict:
    """Match estimated components to true curves greedily by Hausdorff distance.

    Also reports the error against the well-separated part of the curves (the
    points whose 2 sigma ball meets a single curve), which stays meaningful when
    curves cross.
    """
    k, m = len(curves), len(estimates)
    D = np.full((k, m), np.inf)
    for i, c in enumerate(curves):
        for j, e in enumerate(estimates):
            D[i, j] = hausdorff_report(c, e, spacing)["dh"]
    pairs = []
    used_c, used_e = set(), set()
    for flat in np.argsort(D, axis=None, kind="stable"):
        i, j = divmod(int(flat), m)
        if i in used_c or j in used_e:
            continue
        pairs.append((i, j, float(D[i, j])))
        used_c.add(i)
        used_e.add(j)
    degenerate = any(
        np.isclose(D[i, j], np.partition(D[:, j], 1)[1]) for i, j, _ in pairs if k > 1
    )
    masks = well_separated_mask(curves, sigma)
    g0 = np.vstack([c.eval(np.linspace(0.0, 1.0, len(mk), endpoint=not c.closed))[mk] for c, mk in zip(curves, masks)])
    est_pts = np.vstack([_estimate_samples(e, spacing) for e in estimates])
    dg0 = float(cKDTree(est_pts).query(g0)[0].max()) if len(g0) else float("nan")
    full = np.vstack([c.sample(spacing) for c in curves])
    return {
        "matches": [{"curve": i, "component": j, "dh": d} for i, j, d in sorted(pairs)],
        "max_dh": max((d for _, _, d in pairs), default=float("nan")),
        "count_mismatch": k != m,
        "degenerate": bool(degenerate),
        "gamma0_fraction": float(np.mean(np.concatenate(masks))),
        "dh_gamma0": dg0,
        "dh_full": float(max(directed_hausdorff(full, est_pts), directed_hausdorff(est_pts, full))),
    }


def median_with_failures(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.nanmedian(v)) if np.any(np.isfinite(v)) else math.nan
