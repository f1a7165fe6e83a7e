"""Compiled per-triangle loops for the soft silhouette rasterizer.

Each (pixel, triangle) pair contributes ``log(1 - p)`` to a per-pixel
accumulator, where ``p`` is the truncated sigmoid of the signed distance.
Loops run serially in a fixed order, so results are bit-reproducible.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _pixel_range(tri, margin, H, W):
    xmin = min(tri[0, 0], min(tri[1, 0], tri[2, 0])) - margin
    xmax = max(tri[0, 0], max(tri[1, 0], tri[2, 0])) + margin
    ymin = min(tri[0, 1], min(tri[1, 1], tri[2, 1])) - margin
    ymax = max(tri[0, 1], max(tri[1, 1], tri[2, 1])) + margin
    c0 = max(0, int(math.ceil(xmin)))
    c1 = min(W - 1, int(math.floor(xmax)))
    r0 = max(0, int(math.ceil(ymin)))
    r1 = min(H - 1, int(math.floor(ymax)))
    return r0, r1, c0, c1


@njit(cache=True, inline="always")
def _closest_on_edge(px, py, ux, uy, ex, ey, inv_ll):
    t = ((px - ux) * ex + (py - uy) * ey) * inv_ll
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = px - (ux + t * ex)
    dy = py - (uy + t * ey)
    return dx * dx + dy * dy, t, dx, dy


@njit(cache=True)
def _triangle_setup(points, face, tri, edge):
    """Copy the triangle into ``tri`` and fill ``edge[k] = (ex, ey, 1 / |e|^2)``."""
    for k in range(3):
        tri[k, 0] = points[face[k], 0]
        tri[k, 1] = points[face[k], 1]
    for k in range(3):
        ex = tri[(k + 1) % 3, 0] - tri[k, 0]
        ey = tri[(k + 1) % 3, 1] - tri[k, 1]
        ll = ex * ex + ey * ey
        edge[k, 0] = ex
        edge[k, 1] = ey
        edge[k, 2] = 1.0 / ll if ll > 0.0 else 0.0
    area2 = edge[0, 0] * (tri[2, 1] - tri[0, 1]) - edge[0, 1] * (tri[2, 0] - tri[0, 0])
    return area2


@njit(cache=True, inline="always")
def _inside(px, py, tri, edge, area2):
    if area2 == 0.0:
        return False
    neg = False
    pos = False
    for k in range(3):
        e = edge[k, 0] * (py - tri[k, 1]) - edge[k, 1] * (px - tri[k, 0])
        if e > 0.0:
            pos = True
        elif e < 0.0:
            neg = True
    return not (pos and neg)


@njit(cache=True)
def accumulate(points, faces, H, W, sigma, cutoff):
    """Return ``sum_T log(1 - p_T)`` per pixel, shape ``(H, W)``."""
    acc = np.zeros((H, W))
    margin = cutoff * sigma
    margin2 = margin * margin
    shift = _softplus(-cutoff)
    tri = np.empty((3, 2))
    edge = np.empty((3, 3))
    for f in range(faces.shape[0]):
        area2 = _triangle_setup(points, faces[f], tri, edge)
        r0, r1, c0, c1 = _pixel_range(tri, margin, H, W)
        for r in range(r0, r1 + 1):
            py = float(r)
            for c in range(c0, c1 + 1):
                px = float(c)
                best = np.inf
                for k in range(3):
                    d2, _, _, _ = _closest_on_edge(px, py, tri[k, 0], tri[k, 1],
                                                   edge[k, 0], edge[k, 1], edge[k, 2])
                    if d2 < best:
                        best = d2
                inside = _inside(px, py, tri, edge, area2)
                if not inside and best >= margin2:
                    continue
                dist = math.sqrt(best)
                x = dist / sigma if inside else -dist / sigma
                acc[r, c] += shift - _softplus(x)
    return acc


@njit(cache=True)
def accumulate_vjp(points, faces, H, W, sigma, cutoff, d_acc):
    """Pull ``d_acc`` (gradient w.r.t. the accumulator) back to ``points``."""
    out = np.zeros(points.shape)
    margin = cutoff * sigma
    margin2 = margin * margin
    tri = np.empty((3, 2))
    edge = np.empty((3, 3))
    g = np.empty(6)
    for f in range(faces.shape[0]):
        area2 = _triangle_setup(points, faces[f], tri, edge)
        r0, r1, c0, c1 = _pixel_range(tri, margin, H, W)
        for i in range(6):
            g[i] = 0.0
        for r in range(r0, r1 + 1):
            py = float(r)
            for c in range(c0, c1 + 1):
                up = d_acc[r, c]
                if up == 0.0:
                    continue
                px = float(c)
                best = np.inf
                kb = 0
                tb = 0.0
                dxb = 0.0
                dyb = 0.0
                for k in range(3):
                    d2, t, dx, dy = _closest_on_edge(px, py, tri[k, 0], tri[k, 1],
                                                     edge[k, 0], edge[k, 1], edge[k, 2])
                    if d2 < best:
                        best = d2
                        kb = k
                        tb = t
                        dxb = dx
                        dyb = dy
                inside = _inside(px, py, tri, edge, area2)
                if not inside and best >= margin2:
                    continue
                dist = math.sqrt(best)
                if dist <= 1e-12:
                    continue
                sign = 1.0 if inside else -1.0
                x = sign * dist / sigma
                s = -up * _sigmoid(x) / sigma
                # d dist / d closest point = -(dx, dy) / dist
                gx = -s * sign * dxb / dist
                gy = -s * sign * dyb / dist
                k1 = (kb + 1) % 3
                g[2 * kb] += gx * (1.0 - tb)
                g[2 * kb + 1] += gy * (1.0 - tb)
                g[2 * k1] += gx * tb
                g[2 * k1 + 1] += gy * tb
        for k in range(3):
            out[faces[f, k], 0] += g[2 * k]
            out[faces[f, k], 1] += g[2 * k + 1]
    return out
