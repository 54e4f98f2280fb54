# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: exact nearest-element queries, ball-cover arcs, biweight KDE."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2, cos, sin, fabs, fmod, floor, acos, M_PI, INFINITY

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double a) noexcept nogil:
    a = fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a -= TWO_PI
    return a


cdef inline double _elem_nearest(long kind, const double[:, ::1] P, Py_ssize_t e,
                                 double qx, double qy, double* px, double* py) noexcept nogil:
    cdef double cx, cy, r, a0, sp, vx, vy, rho, rel, sx, sy, ex, ey, ds, de
    cdef double x0, y0, x1, y1, dx, dy, L2, t
    if kind == 0:
        cx = P[e, 0]; cy = P[e, 1]; r = P[e, 2]; a0 = P[e, 3]; sp = P[e, 4]
        vx = qx - cx
        vy = qy - cy
        rho = sqrt(vx * vx + vy * vy)
        if rho > 0.0:
            rel = _wrap(atan2(vy, vx) - a0)
            if rel <= sp:
                px[0] = cx + r * vx / rho
                py[0] = cy + r * vy / rho
                return fabs(rho - r)
        sx = cx + r * cos(a0); sy = cy + r * sin(a0)
        ex = cx + r * cos(a0 + sp); ey = cy + r * sin(a0 + sp)
        ds = sqrt((qx - sx) * (qx - sx) + (qy - sy) * (qy - sy))
        de = sqrt((qx - ex) * (qx - ex) + (qy - ey) * (qy - ey))
        if ds <= de:
            px[0] = sx; py[0] = sy
            return ds
        px[0] = ex; py[0] = ey
        return de
    x0 = P[e, 0]; y0 = P[e, 1]; x1 = P[e, 2]; y1 = P[e, 3]
    dx = x1 - x0
    dy = y1 - y0
    L2 = dx * dx + dy * dy
    t = 0.0
    if L2 > 0.0:
        t = ((qx - x0) * dx + (qy - y0) * dy) / L2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    px[0] = x0 + t * dx
    py[0] = y0 + t * dy
    return sqrt((qx - px[0]) * (qx - px[0]) + (qy - py[0]) * (qy - py[0]))


def nearest_on_elements(const double[:, ::1] Q, const long[::1] kind, const double[:, ::1] P,
                        double x0, double y0, double h, long nx, long ny,
                        const long[::1] cell_start, const long[::1] cell_items):
    cdef Py_ssize_t m = Q.shape[0]
    dist_a = np.empty(m, dtype=np.float64)
    idx_a = np.empty(m, dtype=np.int64)
    pts_a = np.empty((m, 2), dtype=np.float64)
    cdef double[::1] dist = dist_a
    cdef long[::1] idx = idx_a
    cdef double[:, ::1] pts = pts_a
    cdef Py_ssize_t q, t, e
    cdef long ci, cj, k, a, b, cell, bstep
    cdef double qx, qy, best, bx, by, d, px, py, lb, side
    with nogil:
        for q in range(m):
            qx = Q[q, 0]
            qy = Q[q, 1]
            ci = <long>floor((qx - x0) / h)
            cj = <long>floor((qy - y0) / h)
            if ci < 0:
                ci = 0
            elif ci > nx - 1:
                ci = nx - 1
            if cj < 0:
                cj = 0
            elif cj > ny - 1:
                cj = ny - 1
            best = INFINITY
            bx = 0.0
            by = 0.0
            e = -1
            k = 0
            while True:
                for a in range(ci - k, ci + k + 1):
                    if a < 0 or a >= nx:
                        continue
                    if a == ci - k or a == ci + k:
                        bstep = 1
                    else:
                        bstep = 2 * k
                    b = cj - k
                    while b <= cj + k:
                        if b >= 0 and b < ny:
                            cell = a * ny + b
                            for t in range(cell_start[cell], cell_start[cell + 1]):
                                d = _elem_nearest(kind[cell_items[t]], P, cell_items[t], qx, qy, &px, &py)
                                if d < best:
                                    best = d
                                    bx = px
                                    by = py
                                    e = cell_items[t]
                        if bstep == 0:
                            break
                        b += bstep
                if ci - k <= 0 and cj - k <= 0 and ci + k >= nx - 1 and cj + k >= ny - 1:
                    break
                lb = INFINITY
                if ci - k > 0:
                    side = qx - (x0 + (ci - k) * h)
                    if side < lb:
                        lb = side
                if ci + k < nx - 1:
                    side = (x0 + (ci + k + 1) * h) - qx
                    if side < lb:
                        lb = side
                if cj - k > 0:
                    side = qy - (y0 + (cj - k) * h)
                    if side < lb:
                        lb = side
                if cj + k < ny - 1:
                    side = (y0 + (cj + k + 1) * h) - qy
                    if side < lb:
                        lb = side
                if best <= lb:
                    break
                k += 1
            dist[q] = best
            idx[q] = e
            pts[q, 0] = bx
            pts[q, 1] = by
    return dist_a, idx_a, pts_a


def uncovered_arcs(const double[:, ::1] centers, double eps, const long[::1] balls,
                   const long[::1] ptr, const long[::1] nbr, const double[::1] starts,
                   const double[::1] ends, double tol):
    """Complement of the sorted cover intervals of each listed ball.

    ``starts``/``ends`` hold each ball's cover intervals sorted by start, with
    starts in [0, 2pi) and ends possibly beyond 2pi; ``nbr`` the covering ball.
    """
    cdef Py_ssize_t nb = balls.shape[0]
    cdef Py_ssize_t cap = ptr[nb] + nb
    out_ball_a = np.empty(cap, dtype=np.int64)
    out_start_a = np.empty(cap, dtype=np.float64)
    out_span_a = np.empty(cap, dtype=np.float64)
    out_nbs_a = np.empty(cap, dtype=np.int64)
    out_nbe_a = np.empty(cap, dtype=np.int64)
    cdef long[::1] out_ball = out_ball_a
    cdef double[::1] out_start = out_start_a
    cdef double[::1] out_span = out_span_a
    cdef long[::1] out_nbs = out_nbs_a
    cdef long[::1] out_nbe = out_nbe_a
    ms_a = np.empty(max(1, ptr[nb]), dtype=np.float64)
    me_a = np.empty(max(1, ptr[nb]), dtype=np.float64)
    mis_a = np.empty(max(1, ptr[nb]), dtype=np.int64)
    mie_a = np.empty(max(1, ptr[nb]), dtype=np.int64)
    cdef double[::1] ms = ms_a
    cdef double[::1] me = me_a
    cdef long[::1] mis = mis_a
    cdef long[::1] mie = mie_a
    cdef Py_ssize_t count = 0, i, k, lo, hi, nm, f, g
    cdef double s, en, gap
    with nogil:
        for i in range(nb):
            lo = ptr[i]
            hi = ptr[i + 1]
            if hi == lo:
                out_ball[count] = balls[i]
                out_start[count] = 0.0
                out_span[count] = TWO_PI
                out_nbs[count] = -1
                out_nbe[count] = -1
                count += 1
                continue
            nm = 0
            for k in range(lo, hi):
                s = starts[k]
                en = ends[k]
                if nm > 0 and s <= me[nm - 1] + tol:
                    if en > me[nm - 1]:
                        me[nm - 1] = en
                        mie[nm - 1] = nbr[k]
                else:
                    ms[nm] = s
                    me[nm] = en
                    mis[nm] = nbr[k]
                    mie[nm] = nbr[k]
                    nm += 1
            # wrap: the last interval may run past 2pi over the first ones
            f = 0
            while nm - f > 1 and me[nm - 1] - TWO_PI >= ms[f] - tol:
                if me[f] + TWO_PI > me[nm - 1]:
                    me[nm - 1] = me[f] + TWO_PI
                    mie[nm - 1] = mie[f]
                f += 1
            if me[nm - 1] - ms[nm - 1] >= TWO_PI - tol:
                continue
            for g in range(f, nm):
                if g + 1 < nm:
                    gap = ms[g + 1] - me[g]
                    if gap > tol:
                        out_ball[count] = balls[i]
                        out_start[count] = _wrap(me[g])
                        out_span[count] = gap
                        out_nbs[count] = mie[g]
                        out_nbe[count] = mis[g + 1]
                        count += 1
                else:
                    gap = ms[f] + TWO_PI - me[g]
                    if gap > tol:
                        out_ball[count] = balls[i]
                        out_start[count] = _wrap(me[g])
                        out_span[count] = gap
                        out_nbs[count] = mie[g]
                        out_nbe[count] = mis[f]
                        count += 1
    return (out_ball_a[:count].copy(), out_start_a[:count].copy(), out_span_a[:count].copy(),
            out_nbs_a[:count].copy(), out_nbe_a[:count].copy())


def biweight_kde(const double[:, ::1] Q, const double[:, ::1] X, double h,
                 double x0, double y0, long nx, long ny,
                 const long[::1] cell_start, const long[::1] cell_items):
    """Unnormalized biweight sums over points in the 3x3 cell block (cell size h)."""
    cdef Py_ssize_t m = Q.shape[0]
    out_a = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_a
    cdef Py_ssize_t q, t, j
    cdef long ci, cj, a, b, cell
    cdef double qx, qy, dx, dy, u, acc, h2 = h * h
    with nogil:
        for q in range(m):
            qx = Q[q, 0]
            qy = Q[q, 1]
            ci = <long>floor((qx - x0) / h)
            cj = <long>floor((qy - y0) / h)
            acc = 0.0
            for a in range(ci - 1, ci + 2):
                if a < 0 or a >= nx:
                    continue
                for b in range(cj - 1, cj + 2):
                    if b < 0 or b >= ny:
                        continue
                    cell = a * ny + b
                    for t in range(cell_start[cell], cell_start[cell + 1]):
                        j = cell_items[t]
                        dx = qx - X[j, 0]
                        dy = qy - X[j, 1]
                        u = (dx * dx + dy * dy) / h2
                        if u < 1.0:
                            acc += (1.0 - u) * (1.0 - u)
            out[q] = acc
    return out_a
