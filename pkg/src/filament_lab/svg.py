"""Minimal deterministic SVG 1.1 writer for point sets, polylines and arc chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

from .geom import ARC, ElementSet

MARGIN = 0.05


@dataclass
class Layer:
    """One drawing layer. ``kind`` is points, polyline, polygon, elements or segments."""

    kind: str
    data: object
    style: dict = field(default_factory=dict)
    label: str = ""


def _n(v: float) -> str:
    return format(float(v), ".6g")


def _bbox(layers) -> tuple[float, float, float, float]:
    pts = []
    for ly in layers:
        if ly.kind == "elements":
            es: ElementSet = ly.data
            if len(es):
                from .kernels import element_bboxes

                b = element_bboxes(es.kind, es.params)
                pts += [b[:, :2], b[:, 2:]]
        elif ly.kind == "segments":
            a, b = ly.data
            pts += [np.asarray(a).reshape(-1, 2), np.asarray(b).reshape(-1, 2)]
        else:
            p = np.asarray(ly.data, dtype=float).reshape(-1, 2)
            if len(p):
                pts.append(p)
    if not pts:
        return (-1.0, -1.0, 1.0, 1.0)
    allp = np.vstack(pts)
    lo, hi = allp.min(0), allp.max(0)
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def _style(defaults: dict, style: dict) -> str:
    s = {**defaults, **style}
    return " ".join(f"{k}={quoteattr(str(v))}" for k, v in sorted(s.items()))


def _arc_path(p) -> str:
    cx, cy, r, a0, sp = p
    if sp >= 2 * math.pi - 1e-12:
        # a full circle needs two half arcs
        x0, y0 = cx + r, cy
        x1 = cx - r
        return (f"M {_n(x0)} {_n(y0)} A {_n(r)} {_n(r)} 0 1 1 {_n(x1)} {_n(cy)} "
                f"A {_n(r)} {_n(r)} 0 1 1 {_n(x0)} {_n(y0)}")
    x0, y0 = cx + r * math.cos(a0), cy + r * math.sin(a0)
    x1, y1 = cx + r * math.cos(a0 + sp), cy + r * math.sin(a0 + sp)
    large = 1 if sp > math.pi else 0
    return f"M {_n(x0)} {_n(y0)} A {_n(r)} {_n(r)} 0 {large} 1 {_n(x1)} {_n(y1)}"


def render_svg(layers, path=None, width: int = 600, title: str = "") -> str:
    """Render layers to an SVG document; viewBox is the data box plus a 5% margin.

    Model coordinates are drawn y-up. Empty layers are skipped.
    """
    layers = [ly for ly in layers if _nonempty(ly)]
    x0, y0, x1, y1 = _bbox(layers)
    w, h = max(x1 - x0, 1e-9), max(y1 - y0, 1e-9)
    mx, my = MARGIN * w, MARGIN * h
    vb = (x0 - mx, -(y1 + my), w + 2 * mx, h + 2 * my)
    height = int(round(width * vb[3] / vb[2]))
    scale = max(vb[2], vb[3])
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="{" ".join(_n(v) for v in vb)}">',
    ]
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append('<g transform="scale(1,-1)">')
    lw = _n(scale / 400)
    for ly in layers:
        out.append(f"<g{(' id=' + quoteattr(ly.label)) if ly.label else ''}>")
        if ly.kind == "points":
            r = ly.style.get("r", scale / 300)
            st = _style({"fill": "black"}, {k: v for k, v in ly.style.items() if k != "r"})
            for x, y in np.asarray(ly.data, dtype=float).reshape(-1, 2):
                out.append(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="{_n(r)}" {st}/>')
        elif ly.kind in ("polyline", "polygon"):
            v = np.asarray(ly.data, dtype=float).reshape(-1, 2)
            st = _style({"fill": "none", "stroke": "black", "stroke-width": lw}, ly.style)
            pts = " ".join(f"{_n(a)},{_n(b)}" for a, b in v)
            out.append(f'<{ly.kind} points="{pts}" {st}/>')
        elif ly.kind == "segments":
            a, b = (np.asarray(x, dtype=float).reshape(-1, 2) for x in ly.data)
            st = _style({"stroke": "gray", "stroke-width": lw}, ly.style)
            for p, q in zip(a, b):
                out.append(f'<line x1="{_n(p[0])}" y1="{_n(p[1])}" x2="{_n(q[0])}" y2="{_n(q[1])}" {st}/>')
        elif ly.kind == "elements":
            es: ElementSet = ly.data
            st = _style({"fill": "none", "stroke": "black", "stroke-width": lw}, ly.style)
            for k, p in zip(es.kind, es.params):
                if k == ARC:
                    d = _arc_path(p)
                else:
                    d = f"M {_n(p[0])} {_n(p[1])} L {_n(p[2])} {_n(p[3])}"
                out.append(f'<path d="{d}" {st}/>')
        else:
            raise ValueError(f"unknown layer kind {ly.kind!r}")
        out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    doc = "\n".join(out) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(doc)
    return doc


def _nonempty(ly: Layer) -> bool:
    if ly.kind == "elements":
        return len(ly.data) > 0
    if ly.kind == "segments":
        return len(np.asarray(ly.data[0]).reshape(-1, 2)) > 0
    n = len(np.asarray(ly.data, dtype=float).reshape(-1, 2))
    return n >= (2 if ly.kind in ("polyline", "polygon") else 1)


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
