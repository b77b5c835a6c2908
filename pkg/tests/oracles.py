"""Independent reference computations used to check the fast paths.

Everything here is deliberately naive: direct summation, per-pixel loops,
point-by-point polygon tests, exhaustive search.
"""

import itertools
import math

import numpy as np


def direct_dft(a):
    """I(u, v) = sum_x sum_y a(y, x) exp(-2 pi i (u x / M + v y / N)), indexed [v, u]."""
    n, m = a.shape
    y = np.arange(n)[:, None]
    x = np.arange(m)[None, :]
    out = np.zeros((n, m), dtype=complex)
    for v in range(n):
        for u in range(m):
            out[v, u] = np.sum(a * np.exp(-2j * np.pi * (u * x / m + v * y / n)))
    return out


def direct_idft(s):
    """(1 / MN) sum_u sum_v s(v, u) exp(+2 pi i (u x / M + v y / N))."""
    n, m = s.shape
    v = np.arange(n)[:, None]
    u = np.arange(m)[None, :]
    out = np.zeros((n, m), dtype=complex)
    for y in range(n):
        for x in range(m):
            out[y, x] = np.sum(s * np.exp(2j * np.pi * (u * x / m + v * y / n)))
    return out / (m * n)


def bilinear_shift(a, dx, dy, circular=True, fill=0.0):
    """out(x, y) = a(x - dx, y - dy), evaluated pixel by pixel."""
    h, w = a.shape

    def sample(ix, iy):
        if circular:
            return a[iy % h, ix % w]
        if 0 <= ix < w and 0 <= iy < h:
            return a[iy, ix]
        return fill

    out = np.zeros_like(a, dtype=float)
    for y in range(h):
        for x in range(w):
            sx, sy = x - dx, y - dy
            x0, y0 = math.floor(sx), math.floor(sy)
            tx, ty = sx - x0, sy - y0
            out[y, x] = (
                (1 - tx) * (1 - ty) * sample(x0, y0)
                + tx * (1 - ty) * sample(x0 + 1, y0)
                + (1 - tx) * ty * sample(x0, y0 + 1)
                + tx * ty * sample(x0 + 1, y0 + 1)
            )
    return out


def point_in_polygon(px, py, poly):
    """Vectorized even-odd test of points (px, py) against vertex array poly."""
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[i - 1]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xc)
    return inside


def sampled_iou(poly_a, poly_b, supersample):
    """IoU by testing every lattice point of the joint bounding box."""
    pa, pb = np.asarray(poly_a, float), np.asarray(poly_b, float)
    allp = np.vstack([pa, pb])
    x0, y0 = np.floor(allp.min(axis=0))
    x1, y1 = np.ceil(allp.max(axis=0))
    xs = x0 + (np.arange(int((x1 - x0) * supersample)) + 0.5) / supersample
    ys = y0 + (np.arange(int((y1 - y0) * supersample)) + 0.5) / supersample
    gx, gy = np.meshgrid(xs, ys)
    ia = point_in_polygon(gx, gy, pa)
    ib = point_in_polygon(gx, gy, pb)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0


def box_iou_by_hand(a, b):
    """a, b = (x1, y1, x2, y2)."""
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    area = lambda r: (r[2] - r[0]) * (r[3] - r[1])
    return inter / (area(a) + area(b) - inter)


def best_assignment_total(iou):
    """Largest total IoU over all one-to-one matchings (exhaustive)."""
    p, g = iou.shape
    best = 0.0
    if p <= g:
        for cols in itertools.permutations(range(g), p):
            best = max(best, sum(iou[i, c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(p), g):
            best = max(best, sum(iou[r, j] for j, r in enumerate(rows)))
    return best


def star_polygon(rng, cx, cy, r_mean, vertices):
    """Random simple (star-shaped) polygon around (cx, cy)."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, vertices))
    rad = r_mean * rng.uniform(0.5, 1.3, vertices)
    return np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])


def intensity_centroid(img, box):
    """Background-subtracted intensity centroid inside an integer box."""
    x0, y0, x1, y1 = box
    patch = img[y0:y1, x0:x1].astype(float)
    patch = patch - np.median(patch)
    patch = np.clip(patch, 0, None)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    t = patch.sum()
    return (xs * patch).sum() / t, (ys * patch).sum() / t
