"""End-to-end glue: configuration, pipeline stages and the three worked examples."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import declutter as dcl
from . import edt as edt_mod
from . import evaluate as ev
from . import extract as ext
from . import io
from . import medial as med
from . import support
from .model import FilamentCurve, ModelError, SupportModel, curve_from_config
from .sampler import ArclengthDensity, LabeledSample, NoiseSpec, SamplerConfig, sample, sample_counts
from .svg import Layer, render_svg

log = logging.getLogger(__name__)

DEFAULTS: dict = {
    "model": {"curves": [{"family": "circle", "params": {"radius": 1.0}}]},
    "noise": {"sigma": 0.2, "beta": 0.0},
    "sampler": {"n": 2000, "eta": 1.0, "seed": 0, "clutter_region": [-1.0, -1.0, 1.0, 1.0], "weights": None,
                "h_a": 0.0, "counts": None, "n_clutter": None},
    "support": {"epsilon": None, "method": "nn-max", "C": support.DEFAULT_RATE_C, "min_points": 10},
    "edt": {"delta": None, "grid_step": None},
    "medial": {"spacing": None, "c": med.DEFAULT_C},
    "extract": {"mode": "general", "xi": None, "eta_gap": None, "relax": True, "hitting_time": False,
                "metric": "net", "cut_radius": ext.CUT_RADIUS},
    "declutter": {"enabled": False, "bandwidth": "auto", "region": None},
    "eval": {"n_grid": [500, 2000, 8000, 32000], "replications": 20, "estimator": "edt-extract", "base_seed": 0},
}

_TYPES = {
    ("noise", "sigma"): (int, float), ("noise", "beta"): (int, float),
    ("sampler", "n"): int, ("sampler", "eta"): (int, float), ("sampler", "seed"): int,
    ("sampler", "h_a"): (int, float),
    ("support", "method"): str, ("support", "C"): (int, float), ("support", "min_points"): int,
    ("medial", "c"): (int, float), ("extract", "mode"): str, ("extract", "relax"): bool,
    ("extract", "hitting_time"): bool, ("extract", "metric"): str, ("extract", "cut_radius"): (int, float),
    ("declutter", "enabled"): bool, ("eval", "replications"): int, ("eval", "estimator"): str,
    ("eval", "base_seed"): int,
}

ESTIMATORS = ("edt-extract", "edt-region", "medial-raw", "medial-completed", "boundary")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


def merge_config(user: dict | None) -> dict:
    """Defaults overlaid with ``user``; unknown sections or keys are rejected."""
    cfg = copy.deepcopy(DEFAULTS)
    problems = []
    for sec, vals in (user or {}).items():
        if sec not in cfg:
            problems.append(f"unknown section '{sec}'")
            continue
        if not isinstance(vals, dict):
            problems.append(f"section '{sec}' must be an object")
            continue
        for k, v in vals.items():
            if sec == "model" and k in ("curves", "family", "params", "m"):
                continue
            if k not in cfg[sec]:
                problems.append(f"unknown key '{sec}.{k}'")
                continue
            want = _TYPES.get((sec, k))
            if want is not None and v is not None and (not isinstance(v, want) or (want is int and isinstance(v, bool))):
                problems.append(f"'{sec}.{k}' has type {type(v).__name__}")
            cfg[sec][k] = v
        if sec == "model":
            cfg["model"] = {"curves": vals["curves"]} if "curves" in vals else {"curves": [vals]}
    if cfg["extract"]["mode"] not in ("open", "closed", "general"):
        problems.append("extract.mode must be open, closed or general")
    if cfg["support"]["method"] not in ("nn-max", "rate-formula"):
        problems.append("support.method must be nn-max or rate-formula")
    if cfg["eval"]["estimator"] not in ESTIMATORS:
        problems.append(f"eval.estimator must be one of {ESTIMATORS}")
    if not cfg["model"]["curves"]:
        problems.append("model needs at least one curve")
    for c in cfg["model"]["curves"]:
        if not isinstance(c, dict) or "family" not in c:
            problems.append("every curve needs a 'family'")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def curves_of(cfg: dict) -> list[FilamentCurve]:
    return [curve_from_config(c) for c in cfg["model"]["curves"]]


def noise_of(cfg: dict) -> NoiseSpec:
    return NoiseSpec(float(cfg["noise"]["sigma"]), float(cfg["noise"]["beta"]))


# -- stages -------------------------------------------------------------------------


def simulate(cfg: dict, seed: int | None = None, n: int | None = None, curves=None) -> LabeledSample:
    s = cfg["sampler"]
    curves = curves or curves_of(cfg)
    seed = s["seed"] if seed is None else seed
    if s.get("counts"):
        return sample_counts(curves, noise_of(cfg), s["counts"], int(s.get("n_clutter") or 0),
                             tuple(s["clutter_region"]), seed, ArclengthDensity(s["h_a"]))
    sc = SamplerConfig(curves, noise_of(cfg), int(s["n"] if n is None else n), s["weights"], ArclengthDensity(s["h_a"]),
                       float(s["eta"]), tuple(s["clutter_region"]), seed)
    return sample(sc)


def declutter_points(points, cfg: dict) -> np.ndarray:
    d = cfg["declutter"]
    region = d["region"] or cfg["sampler"]["clutter_region"]
    return dcl.fit(points, region, d["bandwidth"]).classify(points)


@dataclass(eq=False)
class ComponentResult:
    """Estimates for one connected piece of the ball union."""

    support: support.SupportEstimate
    region: edt_mod.EdtEstimate | None = None
    curve: ext.ExtractedCurve | None = None
    split: med.SplitBoundary | None = None
    medial: med.MedialEstimate | None = None
    completed: object = None
    errors: dict = field(default_factory=dict)


def estimate_support(points, cfg: dict) -> support.SupportEstimate:
    s = cfg["support"]
    eps = s["epsilon"]
    if eps is None:
        eps = support.select_epsilon(points, s["method"], C=s["C"], alpha=float(cfg["noise"]["beta"]) + 0.5)
    return support.estimate_support(points, eps)


def components(est: support.SupportEstimate, min_points: int) -> list[support.SupportEstimate]:
    u = est.union
    sizes = np.bincount(u.components)
    order = [int(k) for k in np.argsort(-sizes, kind="stable") if sizes[k] >= min_points]
    if not order:
        raise ValueError(f"no connected component of the support holds {min_points} or more points")
    if u.n_components == 1:
        return [est]
    return [support.restrict(est, k) for k in order]


def estimate_edt(sup: support.SupportEstimate, cfg: dict) -> edt_mod.EdtEstimate:
    e = cfg["edt"]
    return edt_mod.edt_region(sup, e["delta"], e["grid_step"])


def extract_params(cfg: dict, hole=None) -> ext.ExtractParams:
    x = cfg["extract"]
    return ext.ExtractParams(xi=x["xi"], eta_gap=x["eta_gap"], relax=x["relax"], hitting_time=x["hitting_time"],
                             metric=x["metric"], cut_radius=float(x["cut_radius"]), hole_point=hole)


def hole_point(sup: support.SupportEstimate) -> tuple[float, float] | None:
    """A point outside the union enclosed by a hole loop (negative orientation), if any."""
    arr = sup.arrangement
    holes = [k for k in range(arr.n_loops) if arr.orientation[k] < 0]
    if not holes:
        return None
    k = max(holes, key=lambda j: arr.loop_lengths[j])
    es = arr.loop_elements(k)
    pts = es.sample(arr.epsilon / 2)
    lo, hi = pts.min(0), pts.max(0)
    g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 41), np.linspace(lo[1], hi[1], 41)), -1).reshape(-1, 2)
    cand = g[(arr.loop_winding(k, g) != 0) & ~sup.contains(g)]
    if len(cand) == 0:
        return None
    # the candidate deepest inside the hole
    return tuple(float(v) for v in cand[int(np.argmax(es.distance(cand)))])


def extract_curve(region: edt_mod.EdtEstimate, sup: support.SupportEstimate, cfg: dict) -> ext.ExtractedCurve:
    return ext.extract_curve(region, cfg["extract"]["mode"], extract_params(cfg, hole_point(sup)))


def estimate_medial(sup: support.SupportEstimate, region: edt_mod.EdtEstimate, cfg: dict, endpoints=None):
    m = cfg["medial"]
    spacing = m["spacing"] or sup.epsilon / 4
    arr = sup.arrangement
    if arr.n_loops == 2 or endpoints is None:
        split = med.split_closed(arr)
    else:
        split = med.split_open(arr, endpoints[0], endpoints[1], region.sigma_hat, sup.epsilon,
                               med.EndpointSplitConfig(float(m["c"])))
    fit = med.medial_fit(split, spacing)
    return split, fit, med.complete(fit)


def run_components(points, cfg: dict, medial: bool = True) -> tuple[support.SupportEstimate, list[ComponentResult]]:
    """Support, EDT region, extracted curve and medial estimate for every union component."""
    try:
        whole = estimate_support(points, cfg)
    except Exception as exc:
        raise StageError("support", exc) from exc
    out = []
    for sup in components(whole, int(cfg["support"]["min_points"])):
        r = ComponentResult(sup)
        try:
            r.region = estimate_edt(sup, cfg)
            r.curve = extract_curve(r.region, sup, cfg)
        except Exception as exc:
            r.errors["edt"] = str(exc)
        if medial:
            try:
                ends = r.curve.endpoints if r.curve is not None and r.curve.topology == "open" else None
                r.split, r.medial, r.completed = estimate_medial(sup, r.region, cfg, ends)
            except Exception as exc:
                r.errors["medial"] = str(exc)
        out.append(r)
    return whole, out


# -- rate experiments -----------------------------------------------------------------


@dataclass
class RateMeasure:
    """Picklable ``(n, seed) -> error`` for one estimator on the configured single-curve model."""

    cfg: dict
    estimator: str = "edt-extract"

    def __call__(self, n: int, seed: int) -> float:
        cfg = self.cfg
        curve = curves_of(cfg)[0]
        sigma = float(cfg["noise"]["sigma"])
        data = simulate(cfg, seed=seed, n=n, curves=[curve])
        sup = estimate_support(data.points, cfg)
        if self.estimator == "boundary":
            return ev.boundary_hausdorff(SupportModel(curve, sigma), sup)["dh"]
        spacing = sup.epsilon / 20
        if self.estimator.startswith("medial"):
            _, fit, comp = estimate_medial(sup, None, cfg)
            if self.estimator == "medial-raw":
                return ev.hausdorff_report(curve, fit.midpoints, spacing)["truth_to_est"]
            return ev.hausdorff_report(curve, comp, spacing)["dh"]
        region = estimate_edt(sup, cfg)
        if self.estimator == "edt-region":
            return ev.hausdorff_report(curve, region.region_points, spacing)["dh"]
        c = extract_curve(region, sup, cfg)
        return ev.hausdorff_report(curve, c.path, spacing)["dh"]


def rate_experiment(cfg: dict, workers: int | None = None) -> ev.RateReport:
    e = cfg["eval"]
    alpha = float(cfg["noise"]["beta"]) + 0.5
    return ev.fit_rate(RateMeasure(cfg, e["estimator"]), e["n_grid"], alpha, int(e["replications"]),
                       int(e["base_seed"]), workers)


# -- worked examples ------------------------------------------------------------------


EXAMPLES: dict[int, dict] = {
    # one closed and one open filament, well separated
    1: {
        "model": {"curves": [
            {"family": "circle", "params": {"center": [0.0, 0.35], "radius": 0.45}},
            {"family": "sine-arc", "params": {"start": [-0.8, -0.5], "end": [0.6, -0.5], "amplitude": 0.12, "cycles": 1.0}},
        ]},
        "noise": {"sigma": 0.06, "beta": 0.0},
        "sampler": {"counts": [500, 500], "n_clutter": 500},
        "declutter": {"enabled": True},
        "medial": {"c": 1.5},
    },
    # two filaments that cross each other
    2: {
        "model": {"curves": [
            {"family": "circle", "params": {"center": [0.0, 0.15], "radius": 0.5}},
            {"family": "sine-arc", "params": {"start": [-0.85, -0.45], "end": [0.85, 0.45], "amplitude": 0.1, "cycles": 0.5}},
        ]},
        "noise": {"sigma": 0.06, "beta": 0.0},
        "sampler": {"counts": [500, 500], "n_clutter": 500},
        "declutter": {"enabled": True},
        "medial": {"c": 1.5},
    },
}


def _example3_curves(seed: int = 3) -> list[dict]:
    """Twelve open arcs scattered over the box, several of them crossing."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < 12:
        a = rng.uniform(-0.85, 0.85, 2)
        ang = rng.uniform(0, 2 * math.pi)
        L = rng.uniform(0.5, 0.9)
        b = a + L * np.array([math.cos(ang), math.sin(ang)])
        if np.any(np.abs(b) > 0.9):
            continue
        out.append({"family": "sine-arc", "params": {"start": a.round(4).tolist(), "end": b.round(4).tolist(),
                                                        "amplitude": float(round(rng.uniform(0.02, 0.06), 4)),
                                                        "cycles": 0.5}})
    return out


EXAMPLES[3] = {
    "model": {"curves": _example3_curves()},
    "noise": {"sigma": 0.03, "beta": 0.0},
    "sampler": {"counts": [80] * 12, "n_clutter": 350},
    "declutter": {"enabled": True},
    "medial": {"c": 1.5},
}


def example_config(k: int) -> dict:
    if k not in EXAMPLES:
        raise ConfigError(f"no example {k}; choose 1, 2 or 3")
    return merge_config(EXAMPLES[k])


def _support_layers(curves, sigma):
    layers = []
    for c in curves:
        try:
            for es in SupportModel(c, sigma, check=False).boundary_elements(512):
                layers.append(Layer("elements", es, {"stroke": "#999999"}))
        except ModelError:
            pass
        _, d = c.dense(1024)
        layers.append(Layer("polygon" if c.closed else "polyline", d, {"stroke": "#d62728"}))
    return layers


def reproduce_example(k: int, out_dir, seed: int | None = None) -> dict:
    """Regenerate the k-th worked example: data, decluttering, EDT and medial estimates, figures."""
    cfg = example_config(k)
    if seed is not None:
        cfg["sampler"]["seed"] = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves = curves_of(cfg)
    sigma = float(cfg["noise"]["sigma"])
    data = simulate(cfg, curves=curves)
    keep = declutter_points(data.points, cfg)
    cm = ev.confusion(data.labels, keep)
    io.write_points(out / "points.csv", data.points, data.labels, {"predicted": keep.astype(np.int64)})
    clean = data.points[keep]
    whole, comps = run_components(clean, cfg)
    edt_pts = [r.region.region_points for r in comps if r.region is not None]
    mids = [r.completed.vertices for r in comps if r.completed is not None]
    segs = [(r.medial.y, r.medial.y_near) for r in comps if r.medial is not None]
    curves_out = [r.curve for r in comps if r.curve is not None]
    for i, c in enumerate(curves_out):
        io.write_curve(out / f"extracted_{i}.csv", c.vertices)
    for i, m in enumerate(mids):
        io.write_curve(out / f"medial_{i}.csv", m)
    truth = _support_layers(curves, sigma)
    fig = {
        "truth.svg": truth,
        "data.svg": [Layer("points", data.points)],
        "clutter.svg": [Layer("points", data.points[~keep], {"fill": "#1f77b4"})],
        "decluttered.svg": [Layer("points", clean)],
        "edt.svg": [Layer("points", p, {"fill": "#2ca02c", "r": whole.epsilon / 8}) for p in edt_pts]
        + [Layer("elements", whole.arrangement.elements, {"stroke": "#999999"})],
        "medial.svg": [Layer("segments", s, {"stroke": "#cccccc"}) for s in segs]
        + [Layer("polygon" if r.completed.closed else "polyline", r.completed.vertices, {"stroke": "#9467bd"})
           for r in comps if r.completed is not None],
        "extracted.svg": [Layer("points", data.points, {"fill": "#bbbbbb"})]
        + [Layer("polygon" if c.topology == "closed" else "polyline", c.vertices, {"stroke": "#d62728"}) for c in curves_out],
    }
    for name, layers in fig.items():
        render_svg(layers, out / name, title=f"example {k}: {name[:-4]}")
    spacing = whole.epsilon / 10
    evals = {}
    if edt_pts:
        # the region itself is the set estimate; stays meaningful where curves cross
        evals["edt_region"] = ev.multi_filament_eval(curves, edt_pts, sigma, spacing)
    if curves_out:
        evals["edt"] = ev.multi_filament_eval(curves, [c.path for c in curves_out], sigma, spacing)
    if mids:
        evals["medial"] = ev.multi_filament_eval(curves, mids, sigma, spacing)
    summary = {
        "example": k, "seed": cfg["sampler"]["seed"], "n": len(data.points),
        "confusion": {"tp": cm.tp, "fn": cm.fn, "fp": cm.fp, "tn": cm.tn,
                      "filament_recall": cm.filament_recall, "clutter_recall": cm.clutter_recall},
        "epsilon": whole.epsilon, "components": len(comps),
        "component_errors": [r.errors for r in comps],
        "evaluation": evals,
        "figures": sorted(fig),
    }
    io.write_json(out / "summary.json", summary)
    return summary
