"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a loop version compiled with numba's ``@njit``
and a vectorized pure-numpy version.  The active backend is chosen once at
import time; set ``MINIDRIVE_NO_NUMBA=1`` to force the numpy path (or when
numba is not installed).  ``benchmarks/bench_kernels.py`` compares the two.

Pixel coordinates are (col, row) floats; pixel (c, r) covers the unit
square centered at (c, r).
"""

import math
import os

import numpy as np

_DISABLED = os.environ.get("MINIDRIVE_NO_NUMBA", "").lower() in ("1", "true", "yes")

NUMBA_ENABLED = False
if not _DISABLED:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # noqa: D103 - numba stand-in
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# loop implementations (numba-compiled when enabled)


@njit(cache=True)
def _poly_eval_loop(dcoeffs, taus, idx):
    # dcoeffs: (M, 2, K) derivative-applied coefficients in local time,
    # taus: (N,) local times, idx: (N,) piece indices -> (N, 2)
    n_pts = taus.shape[0]
    n_k = dcoeffs.shape[2]
    out = np.empty((n_pts, 2))
    for i in range(n_pts):
        n = idx[i]
        tau = taus[i]
        for ax in range(2):
            acc = dcoeffs[n, ax, n_k - 1]
            for k in range(n_k - 2, -1, -1):
                acc = acc * tau + dcoeffs[n, ax, k]
            out[i, ax] = acc
    return out


@njit(cache=True)
def _draw_segments_loop(img, p0, p1, value):
    height, width = img.shape
    for s in range(p0.shape[0]):
        dx = p1[s, 0] - p0[s, 0]
        dy = p1[s, 1] - p0[s, 1]
        length = math.sqrt(dx * dx + dy * dy)
        n = int(length / 0.5) + 1
        for t in range(n + 1):
            f = t / n
            c = int(round(p0[s, 0] + f * dx))
            r = int(round(p0[s, 1] + f * dy))
            if 0 <= c < width and 0 <= r < height:
                img[r, c] = value


@njit(cache=True)
def _fill_polygon_loop(img, poly, value):
    # 4x4 supersampled even-odd fill; each pixel gets value * coverage so
    # the summed intensity approximates the polygon area in pixels.
    height, width = img.shape
    n_v = poly.shape[0]
    cmin = max(0, int(math.floor(np.min(poly[:, 0]))))
    cmax = min(width - 1, int(math.ceil(np.max(poly[:, 0]))))
    rmin = max(0, int(math.floor(np.min(poly[:, 1]))))
    rmax = min(height - 1, int(math.ceil(np.max(poly[:, 1]))))
    for r in range(rmin, rmax + 1):
        for c in range(cmin, cmax + 1):
            hits = 0
            for sr in range(4):
                ry = r - 0.5 + (sr + 0.5) / 4.0
                for sc in range(4):
                    cx = c - 0.5 + (sc + 0.5) / 4.0
                    inside = False
                    j = n_v - 1
                    for i in range(n_v):
                        yi = poly[i, 1]
                        yj = poly[j, 1]
                        if (yi > ry) != (yj > ry):
                            x_cross = poly[i, 0] + (ry - yi) * (
                                poly[j, 0] - poly[i, 0]
                            ) / (yj - yi)
                            if cx < x_cross:
                                inside = not inside
                        j = i
                    if inside:
                        hits += 1
            if hits > 0:
                shade = value * hits / 16.0
                if shade > img[r, c]:
                    img[r, c] = shade


@njit(cache=True)
def _boxes_overlap_loop(a, b):
    # SAT for two convex quads given as (4, 2) corner arrays.
    for which in range(2):
        poly = a if which == 0 else b
        for i in range(4):
            j = (i + 1) % 4
            ax = poly[j, 1] - poly[i, 1]
            ay = poly[i, 0] - poly[j, 0]
            amin = 1e300
            amax = -1e300
            bmin = 1e300
            bmax = -1e300
            for k in range(4):
                pa = ax * a[k, 0] + ay * a[k, 1]
                pb = ax * b[k, 0] + ay * b[k, 1]
                amin = min(amin, pa)
                amax = max(amax, pa)
                bmin = min(bmin, pb)
                bmax = max(bmax, pb)
            if amax < bmin or bmax < amin:
                return False
    return True


@njit(cache=True)
def _polyline_min_dist_loop(px, py, pts):
    best = 1e300
    for i in range(pts.shape[0] - 1):
        x0 = pts[i, 0]
        y0 = pts[i, 1]
        dx = pts[i + 1, 0] - x0
        dy = pts[i + 1, 1] - y0
        seg2 = dx * dx + dy * dy
        if seg2 > 0.0:
            t = ((px - x0) * dx + (py - y0) * dy) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        ex = px - (x0 + t * dx)
        ey = py - (y0 + t * dy)
        d = math.sqrt(ex * ex + ey * ey)
        if d < best:
            best = d
    if pts.shape[0] == 1:
        ex = px - pts[0, 0]
        ey = py - pts[0, 1]
        best = math.sqrt(ex * ex + ey * ey)
    return best


# ---------------------------------------------------------------------------
# vectorized numpy implementations


def _poly_eval_numpy(dcoeffs, taus, idx):
    picked = dcoeffs[idx]  # (N, 2, K)
    acc = picked[:, :, -1].copy()
    for k in range(picked.shape[2] - 2, -1, -1):
        acc = acc * taus[:, None] + picked[:, :, k]
    return acc


def _draw_segments_numpy(img, p0, p1, value):
    height, width = img.shape
    for s in range(p0.shape[0]):
        delta = p1[s] - p0[s]
        n = int(math.hypot(delta[0], delta[1]) / 0.5) + 1
        f = np.linspace(0.0, 1.0, n + 1)
        cols = np.rint(p0[s, 0] + f * delta[0]).astype(np.int64)
        rows = np.rint(p0[s, 1] + f * delta[1]).astype(np.int64)
        keep = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
        img[rows[keep], cols[keep]] = value


def _fill_polygon_numpy(img, poly, value):
    height, width = img.shape
    cmin = max(0, int(math.floor(poly[:, 0].min())))
    cmax = min(width - 1, int(math.ceil(poly[:, 0].max())))
    rmin = max(0, int(math.floor(poly[:, 1].min())))
    rmax = min(height - 1, int(math.ceil(poly[:, 1].max())))
    if cmin > cmax or rmin > rmax:
        return
    offsets = -0.5 + (np.arange(4) + 0.5) / 4.0
    cols, rows = np.meshgrid(
        np.arange(cmin, cmax + 1, dtype=float),
        np.arange(rmin, rmax + 1, dtype=float),
    )
    p_i = poly
    p_j = np.roll(poly, 1, axis=0)
    hits = np.zeros(cols.shape, dtype=np.int64)
    for dr in offsets:
        ry = rows + dr
        for dc in offsets:
            cx = cols + dc
            inside = np.zeros(cols.shape, dtype=bool)
            for i in range(poly.shape[0]):
                yi, yj = p_i[i, 1], p_j[i, 1]
                straddles = (yi > ry) != (yj > ry)
                if not straddles.any():
                    continue
                x_cross = p_i[i, 0] + (ry - yi) * (p_j[i, 0] - p_i[i, 0]) / (yj - yi)
                inside ^= straddles & (cx < x_cross)
            hits += inside
    sub = img[rmin : rmax + 1, cmin : cmax + 1]
    np.maximum(sub, value * hits / 16.0, out=sub)


def _boxes_overlap_numpy(a, b):
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=0) - poly
        axes = np.stack([edges[:, 1], -edges[:, 0]], axis=1)  # (4, 2) normals
        pa = axes @ a.T  # (4 axes, 4 corners)
        pb = axes @ b.T
        if (pa.max(axis=1) < pb.min(axis=1)).any() or (
            pb.max(axis=1) < pa.min(axis=1)
        ).any():
            return False
    return True


def _polyline_min_dist_numpy(px, py, pts):
    if pts.shape[0] == 1:
        return float(math.hypot(px - pts[0, 0], py - pts[0, 1]))
    p = np.array([px, py])
    a = pts[:-1]
    d = pts[1:] - a
    seg2 = (d * d).sum(axis=1)
    seg2 = np.where(seg2 > 0.0, seg2, 1.0)
    t = np.clip(((p - a) * d).sum(axis=1) / seg2, 0.0, 1.0)
    closest = a + t[:, None] * d
    return float(np.sqrt(((p - closest) ** 2).sum(axis=1)).min())


# ---------------------------------------------------------------------------
# backend selection

if NUMBA_ENABLED:
    poly_eval = _poly_eval_loop
    draw_segments = _draw_segments_loop
    fill_polygon = _fill_polygon_loop
    boxes_overlap = _boxes_overlap_loop
    polyline_min_dist = _polyline_min_dist_loop
else:
    poly_eval = _poly_eval_numpy
    draw_segments = _draw_segments_numpy
    fill_polygon = _fill_polygon_numpy
    boxes_overlap = _boxes_overlap_numpy
    polyline_min_dist = _polyline_min_dist_numpy
