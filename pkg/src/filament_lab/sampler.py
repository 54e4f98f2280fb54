"""Draw point sets from the filament model, optionally mixed with uniform clutter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .model import FilamentCurve, ModelError

CLUTTER = -1
TABLE_SIZE = 4096


@dataclass(frozen=True)
class NoiseSpec:
    """Radially symmetric noise on B(0, sigma) with planar density ~ (sigma - r)^beta."""

    sigma: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not (self.beta >= 0 and np.isfinite(self.beta)):
            raise ValueError("beta must be finite and >= 0")

    @property
    def alpha(self) -> float:
        return self.beta + 0.5

    def radial_cdf(self, r) -> np.ndarray:
        """P(|noise| <= r): normalized integral of s (sigma - s)^beta."""
        x = np.clip(np.asarray(r, dtype=float) / self.sigma, 0.0, 1.0)
        return special.betainc(2.0, self.beta + 1.0, x)


@dataclass(frozen=True)
class ArclengthDensity:
    """h(u) proportional to 1 + a cos(2 pi u) on [0, 1]; a = 0 is uniform."""

    a: float = 0.0

    def __post_init__(self):
        if abs(self.a) > 0.5:
            raise ValueError("|a| must be <= 0.5 to keep h bounded away from zero")

    @property
    def bounds(self) -> tuple[float, float]:
        return 1.0 - abs(self.a), 1.0 + abs(self.a)

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        return u + self.a * np.sin(2 * np.pi * u) / (2 * np.pi)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = rng.random(n)
        if self.a == 0.0:
            return v
        grid = np.linspace(0.0, 1.0, TABLE_SIZE)
        return np.interp(v, self.cdf(grid), grid)


@dataclass
class SamplerConfig:
    curves: Sequence[FilamentCurve]
    noise: NoiseSpec
    n: int
    weights: Sequence[float] | None = None
    h_spec: ArclengthDensity | Sequence[ArclengthDensity] = field(default_factory=ArclengthDensity)
    eta: float = 1.0
    clutter_region: tuple[float, float, float, float] = (-1.0, -1.0, 1.0, 1.0)
    seed: int = 0
    check_thickness: bool = True

    def __post_init__(self):
        k = len(self.curves)
        if k == 0:
            raise ValueError("at least one curve is required")
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=float)
        if len(w) != k or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        self.weights = w
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        x0, y0, x1, y1 = self.clutter_region
        if not (x1 > x0 and y1 > y0):
            raise ValueError("clutter region must have positive area")
        if self.n < 0:
            raise ValueError("n must be nonnegative")

    def densities(self) -> list[ArclengthDensity]:
        if isinstance(self.h_spec, ArclengthDensity):
            return [self.h_spec] * len(self.curves)
        return list(self.h_spec)


@dataclass
class LabeledSample:
    """Points with provenance labels: curve index, or -1 for clutter."""

    points: np.ndarray
    labels: np.ndarray
    seed: int
    u: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def filament_mask(self) -> np.ndarray:
        return self.labels >= 0


class RadialTable:
    """Inverse-CDF table for the noise radius."""

    def __init__(self, spec: NoiseSpec, size: int = TABLE_SIZE):
        self.r = np.linspace(0.0, spec.sigma, size)
        self.cdf = spec.radial_cdf(self.r)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.interp(v, self.cdf, self.r)


_TABLES: dict[NoiseSpec, RadialTable] = {}


def _table(spec: NoiseSpec) -> RadialTable:
    if spec not in _TABLES:
        _TABLES[spec] = RadialTable(spec)
    return _TABLES[spec]


def draw_noise(spec: NoiseSpec, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Noise offsets with planar density proportional to (sigma - r)^beta on B(0, sigma)."""
    size = 1 if n is None else n
    r = _table(spec)(rng.random(size))
    theta = rng.random(size) * 2 * np.pi
    out = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return out[0] if n is None else out


def sample(config: SamplerConfig) -> LabeledSample:
    """Draw ``n`` labeled points; deterministic given the seed."""
    if config.check_thickness:
        for c in config.curves:
            delta = c.thickness().delta
            if config.noise.sigma >= delta:
                raise ModelError(f"thickness violated: sigma={config.noise.sigma} >= Delta={delta:.6g}")
    rng = np.random.default_rng(config.seed)
    n = config.n
    is_fil = rng.random(n) < config.eta
    which = rng.choice(len(config.curves), size=n, p=config.weights)
    labels = np.where(is_fil, which, CLUTTER).astype(np.int64)
    points = np.empty((n, 2))
    u_all = np.full(n, np.nan)
    dens = config.densities()
    for j, curve in enumerate(config.curves):
        idx = np.flatnonzero(labels == j)
        if idx.size == 0:
            continue
        u = dens[j].draw(rng, idx.size)
        points[idx] = curve.eval(u) + draw_noise(config.noise, rng, idx.size)
        u_all[idx] = u
    idx = np.flatnonzero(labels == CLUTTER)
    if idx.size:
        x0, y0, x1, y1 = config.clutter_region
        points[idx, 0] = x0 + (x1 - x0) * rng.random(idx.size)
        points[idx, 1] = y0 + (y1 - y0) * rng.random(idx.size)
    return LabeledSample(points, labels, config.seed, u_all)


def sample_counts(curves: Sequence[FilamentCurve], noise: NoiseSpec, counts: Sequence[int], n_clutter: int = 0,
                  clutter_region=(-1.0, -1.0, 1.0, 1.0), seed: int = 0,
                  h_spec: ArclengthDensity | None = None) -> LabeledSample:
    """Exactly ``counts[j]`` points on curve j plus ``n_clutter`` uniform points."""
    if len(counts) != len(curves):
        raise ValueError("one count per curve is required")
    rng = np.random.default_rng(seed)
    dens = h_spec or ArclengthDensity()
    pts, labs, us = [], [], []
    for j, (c, k) in enumerate(zip(curves, counts)):
        u = dens.draw(rng, int(k))
        pts.append(c.eval(u) + draw_noise(noise, rng, int(k)))
        labs.append(np.full(int(k), j, dtype=np.int64))
        us.append(u)
    x0, y0, x1, y1 = clutter_region
    cl = np.column_stack([x0 + (x1 - x0) * rng.random(n_clutter), y0 + (y1 - y0) * rng.random(n_clutter)])
    pts.append(cl)
    labs.append(np.full(n_clutter, CLUTTER, dtype=np.int64))
    us.append(np.full(n_clutter, np.nan))
    return LabeledSample(np.vstack(pts), np.concatenate(labs), seed, np.concatenate(us))
