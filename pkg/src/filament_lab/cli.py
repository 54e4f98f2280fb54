"""filament-lab command line.

Every subcommand reads CSV/JSON inputs, writes CSV/JSON/SVG into ``--out`` and is a
pure function of (inputs, config, seed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import io
from . import pipeline as P
from .svg import Layer, render_svg

log = logging.getLogger("filament_lab")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(args) -> dict:
    user = {}
    if args.config:
        try:
            user = io.read_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise P.ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise P.ConfigError("config must be a JSON object")
    for item in args.set or []:
        key, sep, val = item.partition("=")
        sec, dot, name = key.partition(".")
        if not sep or not dot:
            raise P.ConfigError(f"override {item!r} is not of the form section.key=value")
        user.setdefault(sec, {})
        if not isinstance(user[sec], dict):
            raise P.ConfigError(f"section '{sec}' must be an object")
        user[sec][name] = _parse_value(val)
    cfg = P.merge_config(user)
    if args.seed is not None:
        cfg["sampler"]["seed"] = int(args.seed)
        cfg["eval"]["base_seed"] = int(args.seed)
    return cfg


def _points(path) -> np.ndarray:
    pts, _ = io.read_points(path)
    return pts


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (P.ConfigError, P.StageError):
        raise
    except Exception as exc:
        raise P.StageError(name, exc) from exc


# -- subcommands ----------------------------------------------------------------------


def cmd_simulate(args, cfg, out: Path) -> None:
    data = _stage("simulate", P.simulate, cfg)
    io.write_points(out / "points.csv", data.points, data.labels)
    io.write_json(out / "config.json", cfg)
    log.info("wrote %d points", len(data.points))


def cmd_declutter(args, cfg, out: Path) -> None:
    pts, labels = io.read_points(args.input)
    keep = _stage("declutter", P.declutter_points, pts, cfg)
    io.write_points(out / "classified.csv", pts, labels, {"predicted": keep.astype(np.int64)})
    io.write_points(out / "decluttered.csv", pts[keep], labels[keep])
    if np.any(labels != 0):
        cm = ev.confusion(labels, keep)
        io.write_json(out / "confusion.json", {"tp": cm.tp, "fn": cm.fn, "fp": cm.fp, "tn": cm.tn,
                                               "filament_recall": cm.filament_recall,
                                               "clutter_recall": cm.clutter_recall})


def _supports(args, cfg):
    pts = _points(args.input)
    whole = _stage("support", P.estimate_support, pts, cfg)
    return whole, _stage("support", P.components, whole, int(cfg["support"]["min_points"]))


def cmd_estimate_edt(args, cfg, out: Path) -> None:
    whole, comps = _supports(args, cfg)
    io.write_json(out / "boundary.json", whole.arrangement.to_json())
    rows, meta = [], []
    for j, sup in enumerate(comps):
        r = _stage("edt", P.estimate_edt, sup, cfg)
        rows.append(np.column_stack([r.region_points, np.full(len(r.region_points), j)]))
        meta.append({"component": j, "sigma_hat": r.sigma_hat, "y_hat": r.y_hat, "delta": r.delta,
                     "grid_step": r.grid_step, "threshold": r.threshold, "points": len(r.region_points)})
    region = np.vstack(rows)
    io.write_points(out / "edt_region.csv", region[:, :2], region[:, 2].astype(np.int64))
    io.write_json(out / "edt.json", {"epsilon": whole.epsilon, "components": meta})


def cmd_extract(args, cfg, out: Path) -> None:
    whole, comps = _supports(args, cfg)
    meta = []
    for j, sup in enumerate(comps):
        region = _stage("edt", P.estimate_edt, sup, cfg)
        c = _stage("extract", P.extract_curve, region, sup, cfg)
        io.write_curve(out / f"curve_{j}.csv", c.vertices)
        meta.append({"component": j, "topology": c.topology, "endpoints": c.endpoints, **c.diagnostics})
    io.write_json(out / "extract.json", {"epsilon": whole.epsilon, "curves": meta})


def cmd_estimate_medial(args, cfg, out: Path) -> None:
    whole, comps = _supports(args, cfg)
    meta = []
    for j, sup in enumerate(comps):
        region = ends = None
        if sup.arrangement.n_loops != 2:
            region = _stage("edt", P.estimate_edt, sup, cfg)
            ends = _stage("extract", P.extract_curve, region, sup, cfg).endpoints
        split, fit, comp = _stage("medial", P.estimate_medial, sup, region, cfg, ends)
        io.write_curve(out / f"midpoints_{j}.csv", fit.midpoints)
        io.write_curve(out / f"medial_{j}.csv", comp.vertices)
        meta.append({"component": j, "closed": fit.closed, "midpoints": len(fit.midpoints),
                     "breakpoints": fit.breakpoints})
    io.write_json(out / "medial.json", {"epsilon": whole.epsilon, "components": meta})


def cmd_evaluate(args, cfg, out: Path) -> None:
    curves = P.curves_of(cfg)
    est = [io.read_curve(p) for p in args.curves]
    sigma = float(cfg["noise"]["sigma"])
    spacing = args.spacing
    if spacing is None:
        spacing = min(c.length for c in curves) / 2000
    if len(curves) == 1 and len(est) == 1:
        rep = _stage("evaluate", ev.hausdorff_report, curves[0], est[0], spacing)
    else:
        rep = _stage("evaluate", ev.multi_filament_eval, curves, est, sigma, spacing)
    io.write_json(out / "evaluation.json", rep)
    print(json.dumps(io._jsonable({k: v for k, v in rep.items() if k != "matches"}), sort_keys=True))


def cmd_rate_experiment(args, cfg, out: Path) -> None:
    rep = _stage("rate-experiment", P.rate_experiment, cfg)
    io.write_json(out / "rate.json", rep.to_json())
    print(f"slope {rep.fitted_slope:.4f} (theory {rep.theoretical_slope:.4f})")


def cmd_render(args, cfg, out: Path) -> None:
    layers = []
    for p in args.points or []:
        layers.append(Layer("points", _points(p)))
    for p in args.curves or []:
        layers.append(Layer("polyline", io.read_curve(p), {"stroke": "#d62728"}))
    if not layers:
        raise P.StageError("render", ValueError("nothing to draw; pass --points or --curves"))
    render_svg(layers, out / args.name, title=args.name)


def cmd_reproduce(args, cfg, out: Path) -> None:
    s = _stage("reproduce-example", P.reproduce_example, args.k, out, args.seed)
    print(json.dumps(io._jsonable({k: s[k] for k in ("example", "n", "epsilon", "components", "confusion")}),
                     sort_keys=True))


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="random seed (overrides sampler.seed and eval.base_seed)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry; VALUE is parsed as JSON when possible")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="filament-lab", description="Filament estimation for planar point clouds.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw a labeled sample")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("declutter", parents=[common], help="split filament points from clutter")
    s.add_argument("input", help="points CSV")
    s.set_defaults(func=cmd_declutter)

    s = sub.add_parser("estimate-edt", parents=[common], help="EDT region estimate")
    s.add_argument("input")
    s.set_defaults(func=cmd_estimate_edt)

    s = sub.add_parser("estimate-medial", parents=[common], help="medial midpoints and completion")
    s.add_argument("input")
    s.set_defaults(func=cmd_estimate_medial)

    s = sub.add_parser("extract", parents=[common], help="extract curves from the EDT region")
    s.add_argument("input")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("evaluate", parents=[common], help="Hausdorff error against the configured truth")
    s.add_argument("curves", nargs="+", help="estimated curve CSVs")
    s.add_argument("--spacing", type=float)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("rate-experiment", parents=[common], help="replicated log-log rate fit")
    s.set_defaults(func=cmd_rate_experiment)

    s = sub.add_parser("render", parents=[common], help="draw point and curve CSVs to SVG")
    s.add_argument("--points", nargs="*")
    s.add_argument("--curves", nargs="*")
    s.add_argument("--name", default="render.svg")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("reproduce-example", parents=[common], help="rerun worked example 1, 2 or 3")
    s.add_argument("k", type=int, choices=(1, 2, 3))
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except P.ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        args.func(args, cfg, out)
    except P.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except P.ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
