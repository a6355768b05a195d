"""Crossings of a planar polyline with itself.

Broad phase by spatial hashing: every segment is registered in the grid cells
its bounding box touches, and a candidate pair is tested only in the cell that
contains the lower-left corner of the overlap of the two boxes, so no pair is
tested twice. The numpy path uses a k-d tree on segment midpoints instead.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, jit

PARALLEL_RTOL = 1e-12


@jit
def _hash_crossings(P, cell, active):
    """Crossings (i, j, s, u) of segments P[i]->P[i+1], P[j]->P[j+1], i < j - 1.

    ``active[i]`` false drops pairs where neither segment is active.
    """
    nseg = P.shape[0] - 1
    xmin = np.empty(nseg)
    xmax = np.empty(nseg)
    ymin = np.empty(nseg)
    ymax = np.empty(nseg)
    for i in range(nseg):
        xmin[i] = min(P[i, 0], P[i + 1, 0])
        xmax[i] = max(P[i, 0], P[i + 1, 0])
        ymin[i] = min(P[i, 1], P[i + 1, 1])
        ymax[i] = max(P[i, 1], P[i + 1, 1])
    ox = xmin.min()
    oy = ymin.min()
    ny = int((ymax.max() - oy) / cell) + 2
    # cell incidences
    count = 0
    for i in range(nseg):
        cx0 = int((xmin[i] - ox) / cell)
        cx1 = int((xmax[i] - ox) / cell)
        cy0 = int((ymin[i] - oy) / cell)
        cy1 = int((ymax[i] - oy) / cell)
        count += (cx1 - cx0 + 1) * (cy1 - cy0 + 1)
    keys = np.empty(count, dtype=np.int64)
    segs = np.empty(count, dtype=np.int64)
    k = 0
    for i in range(nseg):
        cx0 = int((xmin[i] - ox) / cell)
        cx1 = int((xmax[i] - ox) / cell)
        cy0 = int((ymin[i] - oy) / cell)
        cy1 = int((ymax[i] - oy) / cell)
        for cx in range(cx0, cx1 + 1):
            for cy in range(cy0, cy1 + 1):
                keys[k] = cx * ny + cy
                segs[k] = i
                k += 1
    order = np.argsort(keys, kind="mergesort")
    keys = keys[order]
    segs = segs[order]
    cap = 1024
    out_i = np.empty(cap, dtype=np.int64)
    out_j = np.empty(cap, dtype=np.int64)
    out_s = np.empty(cap)
    out_u = np.empty(cap)
    n_out = 0
    start = 0
    while start < count:
        stop = start
        while stop < count and keys[stop] == keys[start]:
            stop += 1
        key = keys[start]
        for a in range(start, stop):
            for b in range(a + 1, stop):
                i = segs[a]
                j = segs[b]
                if i > j:
                    i, j = j, i
                if j - i <= 1:
                    continue
                if not (active[i] or active[j]):
                    continue
                if xmax[i] < xmin[j] or xmax[j] < xmin[i] or ymax[i] < ymin[j] or ymax[j] < ymin[i]:
                    continue
                # ownership: corner of the box overlap must fall in this cell
                cx = int((max(xmin[i], xmin[j]) - ox) / cell)
                cy = int((max(ymin[i], ymin[j]) - oy) / cell)
                if cx * ny + cy != key:
                    continue
                rx = P[i + 1, 0] - P[i, 0]
                ry = P[i + 1, 1] - P[i, 1]
                wx = P[j + 1, 0] - P[j, 0]
                wy = P[j + 1, 1] - P[j, 1]
                den = rx * wy - ry * wx
                if abs(den) <= PARALLEL_RTOL * (abs(rx) + abs(ry)) * (abs(wx) + abs(wy)):
                    continue
                qx = P[j, 0] - P[i, 0]
                qy = P[j, 1] - P[i, 1]
                s = (qx * wy - qy * wx) / den
                u = (qx * ry - qy * rx) / den
                if 0.0 <= s < 1.0 and 0.0 <= u < 1.0:
                    if n_out == cap:
                        cap *= 2
                        out_i = _grow_i(out_i, cap)
                        out_j = _grow_i(out_j, cap)
                        out_s = _grow_f(out_s, cap)
                        out_u = _grow_f(out_u, cap)
                    out_i[n_out] = i
                    out_j[n_out] = j
                    out_s[n_out] = s
                    out_u[n_out] = u
                    n_out += 1
        start = stop
    return out_i[:n_out], out_j[:n_out], out_s[:n_out], out_u[:n_out]


@jit
def _grow_i(a, cap):
    b = np.empty(cap, dtype=np.int64)
    b[:a.shape[0]] = a
    return b


@jit
def _grow_f(a, cap):
    b = np.empty(cap)
    b[:a.shape[0]] = a
    return b


def _tree_crossings(P, cell, active):
    from scipy.spatial import cKDTree

    A = P[:-1]
    B = P[1:]
    mid = 0.5 * (A + B)
    half = 0.5 * np.hypot(*(B - A).T).max()
    tree = cKDTree(mid)
    pairs = tree.query_pairs(2.0 * half + 1e-15, output_type="ndarray")
    if len(pairs) == 0:
        return (np.zeros(0, np.int64),) * 2 + (np.zeros(0),) * 2
    i = pairs.min(axis=1)
    j = pairs.max(axis=1)
    keep = (j - i > 1) & (active[i] | active[j])
    i, j = i[keep], j[keep]
    r = B[i] - A[i]
    w = B[j] - A[j]
    q = A[j] - A[i]
    den = r[:, 0] * w[:, 1] - r[:, 1] * w[:, 0]
    scale = (np.abs(r).sum(axis=1)) * (np.abs(w).sum(axis=1))
    ok = np.abs(den) > PARALLEL_RTOL * scale
    den = np.where(ok, den, 1.0)
    s = (q[:, 0] * w[:, 1] - q[:, 1] * w[:, 0]) / den
    u = (q[:, 0] * r[:, 1] - q[:, 1] * r[:, 0]) / den
    hit = ok & (s >= 0) & (s < 1) & (u >= 0) & (u < 1)
    order = np.lexsort((j[hit], i[hit]))
    return i[hit][order], j[hit][order], s[hit][order], u[hit][order]


def polyline_crossings(P, active=None, backend: str | None = None):
    """All proper crossings of the polyline through the rows of P, sorted by (i, j)."""
    P = np.ascontiguousarray(P, dtype=float)
    nseg = len(P) - 1
    if nseg < 3:
        return (np.zeros(0, np.int64),) * 2 + (np.zeros(0),) * 2
    active = np.ones(nseg, dtype=np.bool_) if active is None else np.ascontiguousarray(active, np.bool_)
    lengths = np.hypot(*np.diff(P, axis=0).T)
    cell = max(2.0 * float(lengths.max()), 1e-300)
    if backend is None:
        backend = "hash" if USE_NUMBA else "tree"
    if backend == "hash":
        i, j, s, u = _hash_crossings(P, cell, active)
        order = np.lexsort((j, i))
        return i[order], j[order], s[order], u[order]
    return _tree_crossings(P, cell, active)
