"""Pipeline commands operating on manifests, registries and directories.

Each ``cmd_*`` function does the work of one subcommand and returns plain
data (paths, reports); printing and exit codes belong to :mod:`.main`.
"""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..annotio import (
    RegistryEntry,
    TransformRegistry,
    read_labelme,
    utc_timestamp,
    write_labelme,
)
from ..compose import BandAssignment, back_transfer_labels, compose_rgb
from ..errors import InputError
from ..labels import KIND_BY_FLAG, match_and_score, pooled_mean, translate_labels
from ..raster import IDENTITY, Displacement, load_raster, save_rgb_png
from ..refine import CalibrationPair, RefineConfig, RefinedTransform, refine_displacement
from ..spectral import phase_correlate
from ..synth import SynthSpec, image_name, write_dataset
from .manifest import RunManifest

log = logging.getLogger(__name__)


@dataclass
class BandCalibration:
    band: str
    kind: str
    refined: RefinedTransform
    phase_estimates: list[Displacement]
    time_ms: float

    @property
    def displacement(self) -> Displacement:
        return self.refined.displacement

    def as_dict(self) -> dict:
        d = self.displacement
        return {
            "band": self.band,
            "kind": self.kind,
            "dx": d.dx,
            "dy": d.dy,
            "mean_iou": self.refined.mean_iou,
            "time_ms": self.time_ms,
            "evaluations": self.refined.evaluations,
            "phase_estimates": [[p.dx, p.dy] for p in self.phase_estimates],
            "trace": [
                {
                    "stage": r.stage,
                    "scale": r.scale,
                    "dx": r.displacement.dx,
                    "dy": r.displacement.dy,
                    "mean_iou": r.mean_iou,
                    "elapsed_ms": r.elapsed_ms,
                }
                for r in self.refined.trace
            ],
        }


@dataclass
class CalibrationReport:
    reference: str
    rows: list[BandCalibration] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"reference_band": self.reference, "rows": [r.as_dict() for r in self.rows]}

    def table(self) -> str:
        lines = [
            f"{'Band':>4} | {'Kind':>4} | {'Transform (px)':>20} | {'IoU (%)':>7} | {'Time (ms)':>9}",
            "-" * 58,
        ]
        for r in self.rows:
            d = r.displacement
            lines.append(
                f"{r.band:>4} | {r.kind:>4} | {f'({d.dx:.2f}, {d.dy:.2f})':>20} | "
                f"{100 * r.refined.mean_iou:7.2f} | {r.time_ms:9.2f}"
            )
        return "\n".join(lines)


def _load(path: Path, bit_depth):
    return load_raster(path, bit_depth)


def calibrate_band(
    ref_images: Sequence,
    band_images: Sequence,
    pairs: Sequence[CalibrationPair],
    cfg: RefineConfig,
) -> tuple[RefinedTransform, list[Displacement]]:
    """Average the phase-correlation estimates over the image pairs, then
    refine against the calibration labels. Identical image objects are
    known to be aligned and skip the correlation."""
    if not ref_images:
        raise InputError("calibration split is empty")
    estimates = [
        IDENTITY if a is b else phase_correlate(a, b) for a, b in zip(ref_images, band_images)
    ]
    initial = Displacement(
        math.fsum(e.dx for e in estimates) / len(estimates),
        math.fsum(e.dy for e in estimates) / len(estimates),
    )
    return refine_displacement(initial, pairs, cfg), estimates


def cmd_calibrate(
    manifest: RunManifest,
    kinds: Sequence[str] = ("bb",),
    bands: Sequence[str] | None = None,
    cfg_overrides: dict | None = None,
    timing_repeats: int = 1,
    registry: TransformRegistry | None = None,
) -> tuple[TransformRegistry, CalibrationReport]:
    """Register every target band against the reference band.

    The reported time is the median over ``timing_repeats`` runs of phase
    correlation plus refinement (image loading excluded).
    """
    if not manifest.calibration:
        raise InputError("calibration split is empty")
    registry = registry if registry is not None else TransformRegistry()
    ref = manifest.reference
    bands = list(bands) if bands is not None else manifest.target_bands
    overrides = cfg_overrides or {}

    ref_imgs = [_load(s.image(ref), manifest.bit_depth) for s in manifest.calibration]
    shape = ref_imgs[0].shape
    report = CalibrationReport(ref)
    for band in bands:
        band = str(band)
        if band not in manifest.bands:
            raise InputError(f"band {band} is not listed in the manifest")
        if band == ref:
            band_imgs = ref_imgs
        else:
            band_imgs = [_load(s.image(band), manifest.bit_depth) for s in manifest.calibration]
        for img in ref_imgs + band_imgs:
            if img.shape != shape:
                raise InputError(
                    f"inconsistent image dimensions in calibration split: {img.shape} vs {shape}"
                )
        for kind in kinds:
            cfg = RefineConfig(
                n=overrides.get("n", manifest.refine_n),
                scales=overrides.get("scales", manifest.scales),
                kind=kind,
                supersample=overrides.get("supersample", manifest.supersample),
            )
            pairs = [
                CalibrationPair(
                    read_labelme(s.annotation(kind, ref)),
                    read_labelme(s.annotation(kind, band)),
                )
                for s in manifest.calibration
            ]
            times = []
            for _ in range(max(1, timing_repeats)):
                t0 = time.perf_counter()
                refined, estimates = calibrate_band(ref_imgs, band_imgs, pairs, cfg)
                times.append((time.perf_counter() - t0) * 1e3)
            for s, e in zip(manifest.calibration, estimates):
                log.info("band %s scene %s phase estimate (%.3f, %.3f)", band, s.stem, e.dx, e.dy)
            row = BandCalibration(band, kind, refined, estimates, statistics.median(times))
            report.rows.append(row)
            if band != ref:
                registry.put(
                    ref,
                    band,
                    kind,
                    RegistryEntry(
                        refined.displacement,
                        min(max(refined.mean_iou, 0.0), 1.0),
                        row.time_ms,
                        len(manifest.calibration),
                        utc_timestamp(),
                    ),
                )
    return registry, report


def _band_output(out_dir: Path, stem: str, band: str) -> Path:
    return out_dir / image_name(stem, band, ".json")


def cmd_transfer(
    manifest: RunManifest,
    registry: TransformRegistry,
    kind: str,
    out_dir,
    source_dir=None,
) -> list[Path]:
    """Translate reference-band labels of every evaluation scene into each
    band; writes ``<out>/<stem>__band<k>.json``.

    Source labels come from the manifest unless ``source_dir`` holds
    ``<stem>__band<ref>.json`` files.
    """
    out_dir = Path(out_dir)
    ref = manifest.reference
    for band in manifest.bands:
        if (ref, band, kind) not in registry:
            raise InputError(f"registry has no {kind} transform {ref}→{band}")
    written = []
    for scene in manifest.evaluation:
        if source_dir is not None:
            src_path = Path(source_dir) / image_name(scene.stem, ref, ".json")
        else:
            src_path = scene.annotation(kind, ref)
        source = read_labelme(src_path).of_kind(kind)
        for band in manifest.bands:
            labels = translate_labels(source, registry.get(ref, band, kind)) if band != ref else source
            path = _band_output(out_dir, scene.stem, band)
            write_labelme(labels, path, str(scene.image(band)))
            written.append(path)
    return written


def cmd_compose_rgb(
    manifest: RunManifest, registry: TransformRegistry, kind: str, out_dir, split: str = "evaluation"
) -> list[Path]:
    """Write ``<out>/<stem>__rgb.png`` for every scene of ``split``."""
    out_dir = Path(out_dir)
    rgb = manifest.rgb_bands
    assign = BandAssignment.from_registry(
        registry, manifest.reference, kind, rgb["red"], rgb["green"], rgb["blue"]
    )
    scenes = manifest.evaluation if split == "evaluation" else manifest.calibration
    written = []
    for scene in scenes:
        bands = [_load(scene.image(b), manifest.bit_depth) for b, _ in assign.channels]
        path = out_dir / f"{scene.stem}__rgb.png"
        save_rgb_png(compose_rgb(bands, assign), path)
        written.append(path)
    return written


def cmd_backprop(
    manifest: RunManifest,
    registry: TransformRegistry,
    kind: str,
    rgb_dir,
    out_dir,
    split: str = "evaluation",
) -> list[Path]:
    """Push ``<rgb_dir>/<stem>__rgb.json`` labels into every band."""
    out_dir = Path(out_dir)
    scenes = manifest.evaluation if split == "evaluation" else manifest.calibration
    written = []
    for scene in scenes:
        rgb_labels = read_labelme(Path(rgb_dir) / f"{scene.stem}__rgb.json").of_kind(kind)
        per_band = back_transfer_labels(
            rgb_labels, registry, manifest.bands, manifest.reference, kind
        )
        for band, labels in per_band.items():
            path = _band_output(out_dir, scene.stem, band)
            write_labelme(labels, path, str(scene.image(band)))
            written.append(path)
    return written


@dataclass
class EvaluationReport:
    kind: str
    per_image: list[dict]
    mean_iou: float
    per_band: dict[str, float]
    wall_ms: float

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean_iou": self.mean_iou,
            "per_band": self.per_band,
            "per_image": self.per_image,
            "wall_ms": self.wall_ms,
        }

    def table(self) -> str:
        lines = [f"{'Image':<32} | {'IoU (%)':>7} | {'pairs':>5}", "-" * 50]
        for row in self.per_image:
            lines.append(f"{row['name']:<32} | {100 * row['mean_iou']:7.2f} | {row['pairs']:5d}")
        lines.append("-" * 50)
        for band, v in sorted(self.per_band.items()):
            lines.append(f"{'band ' + band:<32} | {100 * v:7.2f} |")
        lines.append(f"{'all':<32} | {100 * self.mean_iou:7.2f} |")
        lines.append(f"wall time {self.wall_ms:.1f} ms")
        return "\n".join(lines)


def _band_of(name: str) -> str | None:
    stem = name.rsplit(".", 1)[0]
    if "__band" in stem:
        return stem.rsplit("__band", 1)[1]
    return None


def cmd_evaluate(
    pred_dir,
    gt_dir,
    kind: str = "bb",
    pattern: str = "*.json",
    supersample: int = 8,
    allow_extra_gt: bool = False,
) -> EvaluationReport:
    """Score predicted annotation files against same-named ground truth.

    The mean IoU pools all shape pairs over all images.
    """
    t0 = time.perf_counter()
    preds = {p.name: p for p in sorted(Path(pred_dir).glob(pattern))}
    gts = {p.name: p for p in sorted(Path(gt_dir).glob(pattern))}
    missing_gt = sorted(set(preds) - set(gts))
    missing_pred = sorted(set(gts) - set(preds))
    if missing_gt or (missing_pred and not allow_extra_gt):
        raise InputError(
            f"file-set mismatch: no ground truth for {missing_gt}, no prediction for {missing_pred}"
        )
    if not preds:
        raise InputError(f"no annotation files matching {pattern!r} in {pred_dir}")
    kind_name = KIND_BY_FLAG.get(kind, kind)
    reports, per_image, by_band = [], [], {}
    for name, p in preds.items():
        rep = match_and_score(
            read_labelme(p).of_kind(kind_name), read_labelme(gts[name]).of_kind(kind_name), supersample
        )
        reports.append(rep)
        per_image.append(
            {
                "name": name,
                "mean_iou": rep.mean_iou,
                "pairs": len(rep.pairs),
                "unmatched_pred": rep.unmatched_pred,
                "unmatched_gt": rep.unmatched_gt,
            }
        )
        band = _band_of(name)
        if band is not None:
            by_band.setdefault(band, []).append(rep)
    return EvaluationReport(
        kind,
        per_image,
        pooled_mean(reports),
        {b: pooled_mean(r) for b, r in by_band.items()},
        (time.perf_counter() - t0) * 1e3,
    )


def cmd_synth(spec: SynthSpec, out_dir) -> Path:
    return write_dataset(out_dir, spec)
