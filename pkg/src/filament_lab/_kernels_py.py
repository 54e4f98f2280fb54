"""Pure numpy/scipy versions of the compiled kernels.

Same signatures and results as ``_kernels``; used when the extension is not
built or when ``FILAMENT_LAB_PURE=1``.
"""

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi


def pair_nearest(qx, qy, kind, P):
    """Nearest point on element ``k`` for aligned arrays of queries and elements."""
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    dist = np.empty(qx.shape)
    px = np.empty(qx.shape)
    py = np.empty(qx.shape)

    arc = kind == 0
    if np.any(arc):
        cx, cy, r, a0, sp = (P[arc, c] for c in range(5))
        vx = qx[arc] - cx
        vy = qy[arc] - cy
        rho = np.hypot(vx, vy)
        rel = np.mod(np.arctan2(vy, vx) - a0, TWO_PI)
        inside = (rho > 0) & (rel <= sp)
        safe = np.where(rho > 0, rho, 1.0)
        ix = cx + r * vx / safe
        iy = cy + r * vy / safe
        sx, sy = cx + r * np.cos(a0), cy + r * np.sin(a0)
        ex, ey = cx + r * np.cos(a0 + sp), cy + r * np.sin(a0 + sp)
        ds = np.hypot(qx[arc] - sx, qy[arc] - sy)
        de = np.hypot(qx[arc] - ex, qy[arc] - ey)
        use_s = ds <= de
        d_end = np.where(use_s, ds, de)
        dist[arc] = np.where(inside, np.abs(rho - r), d_end)
        px[arc] = np.where(inside, ix, np.where(use_s, sx, ex))
        py[arc] = np.where(inside, iy, np.where(use_s, sy, ey))

    seg = ~arc
    if np.any(seg):
        x0, y0, x1, y1 = (P[seg, c] for c in range(4))
        dx = x1 - x0
        dy = y1 - y0
        L2 = dx * dx + dy * dy
        t = np.where(L2 > 0, ((qx[seg] - x0) * dx + (qy[seg] - y0) * dy) / np.where(L2 > 0, L2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        px[seg] = x0 + t * dx
        py[seg] = y0 + t * dy
        dist[seg] = np.hypot(qx[seg] - px[seg], qy[seg] - py[seg])
    return dist, px, py


def _tree_data(grid):
    cache = grid.cache
    if "tree" not in cache:
        lo = grid.bbox[:, :2]
        hi = grid.bbox[:, 2:]
        centers = 0.5 * (lo + hi)
        radii = 0.5 * np.hypot(*(hi - lo).T)
        big = radii > 4.0 * max(np.median(radii), 1e-12)
        small = np.flatnonzero(~big)
        cache["big"] = np.flatnonzero(big)
        cache["small"] = small
        cache["rmax"] = float(radii[small].max()) if small.size else 0.0
        cache["radii"] = radii
        cache["tree"] = cKDTree(centers[small]) if small.size else None
        cache["anchor"] = cKDTree(grid.anchors)
    return cache


def nearest_on_elements(Q, kind, P, grid, chunk=20000):
    Q = np.ascontiguousarray(Q, dtype=float)
    m = len(Q)
    dist = np.full(m, np.inf)
    idx = np.full(m, -1, dtype=np.int64)
    pts = np.zeros((m, 2))
    if m == 0:
        return dist, idx, pts
    c = _tree_data(grid)
    for lo in range(0, m, chunk):
        q = Q[lo:lo + chunk]
        nq = len(q)
        ub, _ = c["anchor"].query(q)
        qi_parts, el_parts = [], []
        if c["tree"] is not None:
            lists = c["tree"].query_ball_point(q, ub + c["rmax"] + 1e-12)
            counts = np.fromiter((len(x) for x in lists), dtype=np.int64, count=nq)
            if counts.sum():
                qi_parts.append(np.repeat(np.arange(nq), counts))
                el_parts.append(c["small"][np.concatenate([np.asarray(x, dtype=np.int64) for x in lists])])
        big = c["big"]
        if big.size:
            qi_parts.append(np.repeat(np.arange(nq), big.size))
            el_parts.append(np.tile(big, nq))
        qi = np.concatenate(qi_parts)
        el = np.concatenate(el_parts)
        d, px, py = pair_nearest(q[qi, 0], q[qi, 1], kind[el], P[el])
        order = np.lexsort((el, d, qi))
        qi, el, d, px, py = qi[order], el[order], d[order], px[order], py[order]
        first = np.ones(len(qi), dtype=bool)
        first[1:] = qi[1:] != qi[:-1]
        sel = qi[first]
        dist[lo + sel] = d[first]
        idx[lo + sel] = el[first]
        pts[lo + sel, 0] = px[first]
        pts[lo + sel, 1] = py[first]
    return dist, idx, pts


def uncovered_arcs(centers, eps, balls, ptr, nbr, starts, ends, tol):
    out = ([], [], [], [], [])
    for i, b in enumerate(balls):
        lo, hi = ptr[i], ptr[i + 1]
        if hi == lo:
            for lst, v in zip(out, (b, 0.0, TWO_PI, -1, -1)):
                lst.append(v)
            continue
        merged = []
        for k in range(lo, hi):
            s, e = starts[k], ends[k]
            if merged and s <= merged[-1][1] + tol:
                if e > merged[-1][1]:
                    merged[-1][1] = e
                    merged[-1][3] = nbr[k]
            else:
                merged.append([s, e, nbr[k], nbr[k]])
        f = 0
        while len(merged) - f > 1 and merged[-1][1] - TWO_PI >= merged[f][0] - tol:
            if merged[f][1] + TWO_PI > merged[-1][1]:
                merged[-1][1] = merged[f][1] + TWO_PI
                merged[-1][3] = merged[f][3]
            f += 1
        merged = merged[f:]
        if merged[-1][1] - merged[-1][0] >= TWO_PI - tol:
            continue
        for g, cur in enumerate(merged):
            nxt_start = merged[g + 1][0] if g + 1 < len(merged) else merged[0][0] + TWO_PI
            nxt_id = merged[g + 1][2] if g + 1 < len(merged) else merged[0][2]
            gap = nxt_start - cur[1]
            if gap > tol:
                for lst, v in zip(out, (b, np.mod(cur[1], TWO_PI), gap, cur[3], nxt_id)):
                    lst.append(v)
    return (
        np.asarray(out[0], dtype=np.int64),
        np.asarray(out[1], dtype=float) % TWO_PI,
        np.asarray(out[2], dtype=float),
        np.asarray(out[3], dtype=np.int64),
        np.asarray(out[4], dtype=np.int64),
    )


def biweight_kde(Q, X, h, tree=None):
    Q = np.ascontiguousarray(Q, dtype=float)
    out = np.zeros(len(Q))
    if len(Q) == 0 or len(X) == 0:
        return out
    tx = tree if tree is not None else cKDTree(X)
    tq = cKDTree(Q)
    sdm = tq.sparse_distance_matrix(tx, h, output_type="coo_matrix")
    u = (sdm.data / h) ** 2
    w = np.where(u < 1.0, (1.0 - u) ** 2, 0.0)
    np.add.at(out, sdm.row, w)
    # sparse_distance_matrix drops exact zero distances
    d0, _ = tx.query(Q, k=1)
    if np.any(d0 == 0):
        counts = np.array([len(x) for x in tx.query_ball_point(Q[d0 == 0], 0.0)])
        out[d0 == 0] += counts
    return out
