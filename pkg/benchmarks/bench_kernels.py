"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 8000] [--repeat 3]

Each case runs on identical inputs under both backends and the outputs are
compared before any timing is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from filament_lab import edt, kernels, support
from filament_lab.model import build_curve
from filament_lab.sampler import NoiseSpec, SamplerConfig, sample


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def make_cases(n: int, seed: int):
    curve = build_curve("circle", {"radius": 1.0})
    pts = sample(SamplerConfig([curve], NoiseSpec(0.2, 0.0), n, seed=seed)).points
    est = support.estimate_support(pts)
    es = est.arrangement.elements
    grid = kernels.build_element_grid(es.kind, es.params)
    q = np.random.default_rng(seed).uniform(-1.3, 1.3, (20 * n, 2))
    h = 0.05

    return {
        "nearest_on_elements": lambda: kernels.nearest_on_elements(q, es.kind, es.params, grid)[0],
        "support boundary": lambda: support.estimate_support(pts).arrangement.elements.params,
        "biweight_sums": lambda: kernels.biweight_sums(q, pts, h),
        "edt_region": lambda: edt.edt_region(est).region_points,
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8000, help="sample size")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the python backend will be timed")
    prev = kernels.BACKEND
    rows = []
    try:
        cases = make_cases(args.n, args.seed)
        for name, fn in cases.items():
            times, outs = {}, {}
            for b in backends:
                kernels.use_backend(b)
                times[b], outs[b] = best_of(fn, args.repeat)
            if len(outs) == 2 and not np.allclose(outs["python"], outs["cython"], rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree")
            rows.append((name, times))
    finally:
        kernels.use_backend(prev)

    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'case':22s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, t in rows:
        c = t.get("cython")
        sp = f"{t['python'] / c:8.1f}" if c else "       -"
        print(f"{name:22s} {t['python']:11.4f} {(c if c else float('nan')):11.4f} {sp}")


if __name__ == "__main__":
    main()
