"""Bounding-box and polygon labels, translation, and IoU scoring.

Polygon IoU is computed on a sampling lattice: each pixel is split into
``supersample x supersample`` cells and a cell counts as covered when its
centre is inside the polygon under the even-odd rule. The lattice is
anchored to integer pixel coordinates, so it does not depend on where
the shapes sit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import InputError
from .raster import Displacement

BOUNDING_BOX = "bounding_box"
POLYGON = "polygon"
SHAPE_KINDS = (BOUNDING_BOX, POLYGON)

# command-line / registry spelling of the two label kinds
KIND_BY_FLAG = {"bb": BOUNDING_BOX, "mask": POLYGON}
FLAG_BY_KIND = {v: k for k, v in KIND_BY_FLAG.items()}

Point = tuple[float, float]


@dataclass(frozen=True)
class Shape:
    """A named label: a box given by two corners, or a closed polygon."""

    name: str
    kind: str
    points: tuple[Point, ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if self.kind not in SHAPE_KINDS:
            raise InputError(f"unknown shape kind {self.kind!r}")
        if not all(math.isfinite(c) for p in pts for c in p):
            raise InputError(f"non-finite coordinate in shape {self.name!r}")
        if self.kind == BOUNDING_BOX:
            if len(pts) != 2:
                raise InputError(
                    f"bounding box {self.name!r} needs exactly 2 points, got {len(pts)}"
                )
            (x1, y1), (x2, y2) = pts
            if not (x1 < x2 and y1 < y2):
                raise InputError(
                    f"bounding box {self.name!r} corners must satisfy x1<x2, y1<y2"
                )
        elif len(pts) < 3:
            raise InputError(
                f"polygon {self.name!r} needs at least 3 points, got {len(pts)}"
            )

    @classmethod
    def box(cls, name: str, x1: float, y1: float, x2: float, y2: float) -> "Shape":
        return cls(name, BOUNDING_BOX, ((x1, y1), (x2, y2)))

    @cached_property
    def array(self) -> np.ndarray:
        a = np.array(self.points, dtype=np.float64)
        a.setflags(write=False)
        return a

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        a = self.array
        return (a[:, 0].min(), a[:, 1].min(), a[:, 0].max(), a[:, 1].max())

    def as_polygon(self) -> "Shape":
        """The 4-vertex polygon of a box; polygons are returned unchanged."""
        if self.kind == POLYGON:
            return self
        (x1, y1), (x2, y2) = self.points
        return Shape(self.name, POLYGON, ((x1, y1), (x2, y1), (x2, y2), (x1, y2)))

    def translated(self, d: Displacement) -> "Shape":
        return Shape(
            self.name, self.kind, tuple((x + d.dx, y + d.dy) for x, y in self.points)
        )


@dataclass(frozen=True)
class LabelSet:
    image_width: int
    image_height: int
    shapes: tuple[Shape, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))

    def __len__(self):
        return len(self.shapes)

    def of_kind(self, kind: str) -> "LabelSet":
        kind = KIND_BY_FLAG.get(kind, kind)
        return LabelSet(
            self.image_width,
            self.image_height,
            tuple(s for s in self.shapes if s.kind == kind),
        )

    @property
    def kinds(self) -> set[str]:
        return {s.kind for s in self.shapes}


@dataclass
class MatchReport:
    pairs: list[tuple[int, int, float]]
    mean_iou: float
    unmatched_pred: int
    unmatched_gt: int
    total_iou: float = 0.0
    denominator: int = 0


def translate_labels(ls: LabelSet, d: Displacement) -> LabelSet:
    """Apply the translation to every point; names, kinds and order kept."""
    return LabelSet(
        ls.image_width, ls.image_height, tuple(s.translated(d) for s in ls.shapes)
    )


# --------------------------------------------------------------------------
# Bounding boxes
# --------------------------------------------------------------------------


def _box_iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of boxes given as (n, 4) arrays of x1, y1, x2, y2."""
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return iou


def iou_bb(a: Shape, b: Shape) -> float:
    """Closed-form intersection over union of two boxes."""
    if a.kind != BOUNDING_BOX or b.kind != BOUNDING_BOX:
        raise InputError("iou_bb expects two bounding boxes")
    (ax1, ay1), (ax2, ay2) = a.points
    (bx1, by1), (bx2, by2) = b.points
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


# --------------------------------------------------------------------------
# Polygons
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _row_spans(xs, ys, yc, ss, cross, out):
    """Covered lattice-column ranges of one polygon on the row at ``yc``.

    Writes [lo, hi) pairs into ``out`` and returns the number of pairs;
    ``cross`` is scratch space of at least ``len(xs)``.
    """
    n = xs.shape[0]
    m = 0
    for i in range(n):
        j = i - 1 if i > 0 else n - 1
        y1 = ys[i]
        y2 = ys[j]
        if (y1 > yc) != (y2 > yc):
            c = xs[i] + (yc - y1) * (xs[j] - xs[i]) / (y2 - y1)
            # insertion sort: rows cross only a handful of edges
            k = m
            while k > 0 and cross[k - 1] > c:
                cross[k] = cross[k - 1]
                k -= 1
            cross[k] = c
            m += 1
    k = 0
    for i in range(0, m - 1, 2):
        lo = math.ceil(cross[i] * ss - 0.5)
        hi = math.ceil(cross[i + 1] * ss - 0.5)
        if hi > lo:
            out[2 * k] = lo
            out[2 * k + 1] = hi
            k += 1
    return k


@numba.njit(cache=True)
def _lattice_overlap(ax, ay, bx, by, ss, adx, ady):
    """Covered-cell counts (|A|, |B|, |A and B|); polygon A is offset by
    (adx, ady)."""
    ymin = min(ay.min() + ady, by.min())
    ymax = max(ay.max() + ady, by.max())
    j0 = math.floor(ymin * ss - 0.5)
    j1 = math.ceil(ymax * ss - 0.5)
    sa = np.empty(ax.shape[0] + 1, dtype=np.int64)
    sb = np.empty(bx.shape[0] + 1, dtype=np.int64)
    scratch = np.empty(max(ax.shape[0], bx.shape[0]))
    ax_shift = ax + adx
    ay_shift = ay + ady
    count_a = 0
    count_b = 0
    count_i = 0
    for j in range(j0, j1 + 1):
        yc = (j + 0.5) / ss
        na = _row_spans(ax_shift, ay_shift, yc, ss, scratch, sa)
        nb = _row_spans(bx, by, yc, ss, scratch, sb)
        for k in range(na):
            count_a += sa[2 * k + 1] - sa[2 * k]
        for k in range(nb):
            count_b += sb[2 * k + 1] - sb[2 * k]
        p = 0
        q = 0
        while p < na and q < nb:
            lo = max(sa[2 * p], sb[2 * q])
            hi = min(sa[2 * p + 1], sb[2 * q + 1])
            if hi > lo:
                count_i += hi - lo
            if sa[2 * p + 1] < sb[2 * q + 1]:
                p += 1
            else:
                q += 1
    return count_a, count_b, count_i


@numba.njit(cache=True)
def _polygon_iou_pairs(axs, ays, aoff, bxs, bys, boff, ii, jj, ss, dx, dy):
    out = np.zeros(ii.shape[0])
    for t in range(ii.shape[0]):
        i = ii[t]
        j = jj[t]
        ca, cb, ci = _lattice_overlap(
            axs[aoff[i] : aoff[i + 1]],
            ays[aoff[i] : aoff[i + 1]],
            bxs[boff[j] : boff[j + 1]],
            bys[boff[j] : boff[j + 1]],
            ss,
            dx,
            dy,
        )
        union = ca + cb - ci
        if union > 0:
            out[t] = ci / union
    return out


def iou_polygon(a: Shape, b: Shape, supersample: int = 8) -> float:
    """Rasterized IoU of two shapes (boxes are treated as 4-gons)."""
    if supersample < 1:
        raise InputError("supersample must be >= 1")
    pa = a.as_polygon().array
    pb = b.as_polygon().array
    ca, cb, ci = _lattice_overlap(
        pa[:, 0].copy(), pa[:, 1].copy(), pb[:, 0].copy(), pb[:, 1].copy(),
        float(supersample), 0.0, 0.0,
    )
    union = ca + cb - ci
    return ci / union if union > 0 else 0.0


# --------------------------------------------------------------------------
# Matching
# --------------------------------------------------------------------------


def greedy_match(iou: np.ndarray) -> list[tuple[int, int, float]]:
    """Pair rows with columns by descending IoU, each used at most once.

    Only positive IoUs are paired. Ties resolve to the lower row, then
    the lower column.
    """
    rows, cols = np.nonzero(iou > 0)
    if rows.size == 0:
        return []
    vals = iou[rows, cols]
    order = np.lexsort((cols, rows, -vals))
    used_r: set[int] = set()
    used_c: set[int] = set()
    pairs = []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        pairs.append((r, c, float(vals[k])))
    return pairs


def _report(pairs, n_pred: int, n_gt: int) -> MatchReport:
    denom = max(n_pred, n_gt)
    total = math.fsum(p[2] for p in pairs)
    mean = total / denom if denom else 1.0
    return MatchReport(
        pairs=pairs,
        mean_iou=mean,
        unmatched_pred=n_pred - len(pairs),
        unmatched_gt=n_gt - len(pairs),
        total_iou=total,
        denominator=denom,
    )


def _common_kind(*sets: LabelSet) -> str | None:
    kinds = set().union(*(s.kinds for s in sets))
    if len(kinds) > 1:
        raise InputError(f"cannot compare mixed label kinds {sorted(kinds)}")
    return kinds.pop() if kinds else None


class _PackedPolygons:
    def __init__(self, shapes: Sequence[Shape]):
        arrays = [s.as_polygon().array for s in shapes]
        counts = [len(a) for a in arrays]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        if arrays:
            allp = np.concatenate(arrays)
        else:
            allp = np.empty((0, 2))
        self.xs = np.ascontiguousarray(allp[:, 0])
        self.ys = np.ascontiguousarray(allp[:, 1])
        self.bounds = np.array([s.bounds for s in shapes], dtype=np.float64).reshape(-1, 4)


class LabelScorer:
    """Scores translations of a predicted label set against ground truth.

    ``scorer(d)`` equals
    ``match_and_score(translate_labels(pred, d), gt, supersample).mean_iou``
    but keeps the shapes packed in arrays, which matters when thousands of
    candidate translations are tried.
    """

    def __init__(self, pred: LabelSet, gt: LabelSet, supersample: int = 8):
        if supersample < 1:
            raise InputError("supersample must be >= 1")
        self.kind = _common_kind(pred, gt)
        self.supersample = float(supersample)
        self.n_pred = len(pred)
        self.n_gt = len(gt)
        self._pred = _PackedPolygons(pred.shapes)
        self._gt = _PackedPolygons(gt.shapes)

    def iou_matrix(self, d: Displacement = Displacement(0.0, 0.0)) -> np.ndarray:
        pb = self._pred.bounds + np.array([d.dx, d.dy, d.dx, d.dy])
        gb = self._gt.bounds
        if self.kind == BOUNDING_BOX:
            return _box_iou_matrix(pb, gb)
        iou = np.zeros((self.n_pred, self.n_gt))
        if self.n_pred == 0 or self.n_gt == 0:
            return iou
        touch = (
            (pb[:, None, 0] <= gb[None, :, 2])
            & (gb[None, :, 0] <= pb[:, None, 2])
            & (pb[:, None, 1] <= gb[None, :, 3])
            & (gb[None, :, 1] <= pb[:, None, 3])
        )
        ii, jj = np.nonzero(touch)
        if ii.size:
            iou[ii, jj] = _polygon_iou_pairs(
                self._pred.xs, self._pred.ys, self._pred.offsets,
                self._gt.xs, self._gt.ys, self._gt.offsets,
                ii.astype(np.int64), jj.astype(np.int64),
                self.supersample, float(d.dx), float(d.dy),
            )
        return iou

    def report(self, d: Displacement = Displacement(0.0, 0.0)) -> MatchReport:
        return _report(greedy_match(self.iou_matrix(d)), self.n_pred, self.n_gt)

    def __call__(self, d: Displacement) -> float:
        return self.report(d).mean_iou


def match_and_score(pred: LabelSet, gt: LabelSet, supersample: int = 8) -> MatchReport:
    """Greedy max-IoU matching; the mean divides by max(#pred, #gt) so
    unmatched shapes on either side count as zero."""
    return LabelScorer(pred, gt, supersample).report()


def pooled_mean(reports: Iterable[MatchReport]) -> float:
    """Mean IoU over all shape pairs of several images."""
    reports = list(reports)
    denom = sum(r.denominator for r in reports)
    if denom == 0:
        return 1.0
    return math.fsum(r.total_iou for r in reports) / denom
