"""Cascaded grid search that polishes a displacement by maximizing IoU.

Starting from a phase-correlation estimate, each scale ``s`` (default
1, 0.1, 0.01) tries the ``(2n+1)**2`` displacements ``center + (kx, ky)*s``
for ``kx, ky`` in ``[-n, n]`` and moves the center to the best one. The
initial estimate is rounded to the first scale before its grid is built.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InputError
from .labels import KIND_BY_FLAG, SHAPE_KINDS, BOUNDING_BOX, LabelScorer, LabelSet
from .raster import Displacement


@dataclass(frozen=True)
class RefineConfig:
    n: int = 5
    scales: tuple[float, ...] = (1.0, 0.1, 0.01)
    kind: str = BOUNDING_BOX
    supersample: int = 8

    def __post_init__(self):
        object.__setattr__(self, "kind", KIND_BY_FLAG.get(self.kind, self.kind))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if self.kind not in SHAPE_KINDS:
            raise InputError(f"unknown label kind {self.kind!r}")
        if self.n < 1:
            raise InputError("refinement steps n must be >= 1")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise InputError("scales must be a non-empty list of positive numbers")
        if any(a <= b for a, b in zip(self.scales, self.scales[1:])):
            raise InputError("scales must be strictly decreasing")
        if self.supersample < 1:
            raise InputError("supersample must be >= 1")

    @property
    def candidates_per_scale(self) -> int:
        return (2 * self.n + 1) ** 2

    @property
    def budget(self) -> int:
        """Scoring calls made by one refinement run."""
        return 1 + len(self.scales) * self.candidates_per_scale


@dataclass(frozen=True)
class CalibrationPair:
    """Labels of one calibration scene: on the reference band (source)
    and hand-made ground truth on the other band (target)."""

    source: LabelSet
    target: LabelSet


@dataclass(frozen=True)
class StageRecord:
    stage: int
    scale: float | None
    displacement: Displacement
    mean_iou: float
    elapsed_ms: float


@dataclass
class RefinedTransform:
    displacement: Displacement
    mean_iou: float
    trace: list[StageRecord] = field(default_factory=list)
    evaluations: int = 0

    @property
    def elapsed_ms(self) -> float:
        return sum(r.elapsed_ms for r in self.trace)


def candidate_grid(center: Displacement, n: int, s: float) -> list[Displacement]:
    """Row-major (ky outer, kx inner) grid of ``(2n+1)**2`` displacements."""
    if n < 1 or not s > 0:
        raise InputError("candidate grid needs n >= 1 and s > 0")
    ks = range(-n, n + 1)
    return [
        Displacement(center.dx + kx * s if kx else center.dx,
                     center.dy + ky * s if ky else center.dy)
        for ky in ks
        for kx in ks
    ]


def _round_to(v: float, s: float) -> float:
    return round(v / s) * s


def _pair_scorers(pairs: Sequence[CalibrationPair], cfg: RefineConfig):
    if not pairs:
        raise InputError("refinement needs at least one calibration pair")
    scorers = []
    for i, p in enumerate(pairs):
        src = p.source.of_kind(cfg.kind)
        tgt = p.target.of_kind(cfg.kind)
        if len(tgt) == 0:
            raise InputError(f"calibration pair {i} has no ground-truth {cfg.kind} shapes")
        if len(src) == 0:
            raise InputError(f"calibration pair {i} has no source {cfg.kind} shapes")
        scorers.append(LabelScorer(src, tgt, cfg.supersample))
    return scorers


def refine_displacement(
    initial: Displacement,
    pairs: Sequence[CalibrationPair],
    cfg: RefineConfig = RefineConfig(),
    on_stage: Callable[[StageRecord], None] | None = None,
) -> RefinedTransform:
    """Refine ``initial`` against the calibration labels.

    The score of a displacement is the mean, over calibration pairs, of
    the matched mean IoU between translated source labels and the target
    labels. Within a stage the best candidate wins; ties go to the one
    nearest the grid center, then to grid order. A stage only replaces the
    incumbent on a strict improvement, so the traced IoU never decreases
    (the rounded first-scale grid need not contain the raw estimate).
    """
    if not initial.is_finite():
        raise InputError(f"initial displacement {initial} is not finite")
    scorers = _pair_scorers(pairs, cfg)
    evaluations = 0

    def score(d: Displacement) -> float:
        nonlocal evaluations
        evaluations += 1
        return math.fsum(s(d) for s in scorers) / len(scorers)

    trace: list[StageRecord] = []

    def record(rec: StageRecord):
        trace.append(rec)
        if on_stage is not None:
            on_stage(rec)

    t0 = time.perf_counter()
    best, best_iou = initial, score(initial)
    record(StageRecord(0, None, best, best_iou, (time.perf_counter() - t0) * 1e3))

    for stage, s in enumerate(cfg.scales, start=1):
        t0 = time.perf_counter()
        if stage == 1:
            center = Displacement(_round_to(best.dx, s), _round_to(best.dy, s))
        else:
            center = best
        grid = candidate_grid(center, cfg.n, s)
        scored = [
            (-score(d), math.hypot(d.dx - center.dx, d.dy - center.dy), i)
            for i, d in enumerate(grid)
        ]
        neg_iou, _, idx = min(scored)
        if -neg_iou > best_iou:
            best, best_iou = grid[idx], -neg_iou
        record(StageRecord(stage, s, best, best_iou, (time.perf_counter() - t0) * 1e3))

    return RefinedTransform(best, best_iou, trace, evaluations)
