"""Synthetic multiband scenes with exact ground-truth labels.

A scene is a smooth random texture with small pill-shaped objects
(ellipses and capsules). Every band sees the same layout translated by a
known offset plus its own sensor noise, so the offsets and labels of every
band are known exactly. Without noise, zero offsets give identical bands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annotio import emit_labelme, write_text_atomic
from .errors import InputError
from .labels import POLYGON, LabelSet, Shape, translate_labels
from .raster import Displacement, Raster, save_raster, shift_raster

PILL_NAMES = ("round", "oval", "capsule")


@dataclass(frozen=True)
class Pill:
    name: str
    cx: float
    cy: float
    a: float  # half-length along the main axis
    b: float  # half-width
    angle: float  # radians
    capsule: bool

    def outline(self, vertices: int = 24) -> np.ndarray:
        """Closed outline as an (n, 2) array, counter-clockwise."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        if self.capsule:
            half = max(self.a - self.b, 0.0)
            k = max(vertices // 2, 3)
            t1 = np.linspace(-np.pi / 2, np.pi / 2, k)
            t2 = t1 + np.pi
            u = np.concatenate([half + self.b * np.cos(t1), -half + self.b * np.cos(t2)])
            v = np.concatenate([self.b * np.sin(t1), self.b * np.sin(t2)])
        else:
            t = np.linspace(0, 2 * np.pi, vertices, endpoint=False)
            u, v = self.a * np.cos(t), self.b * np.sin(t)
        return np.column_stack([self.cx + c * u - s * v, self.cy + s * u + c * v])

    def box(self) -> tuple[float, float, float, float]:
        c, s = abs(math.cos(self.angle)), abs(math.sin(self.angle))
        if self.capsule:
            half = max(self.a - self.b, 0.0)
            ex, ey = half * c + self.b, half * s + self.b
        else:
            ex = math.sqrt((self.a * c) ** 2 + (self.b * s) ** 2)
            ey = math.sqrt((self.a * s) ** 2 + (self.b * c) ** 2)
        return (self.cx - ex, self.cy - ey, self.cx + ex, self.cy + ey)

    def coverage(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Anti-aliased coverage in [0, 1] at pixel centres."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = (xs - self.cx) * c + (ys - self.cy) * s
        v = -(xs - self.cx) * s + (ys - self.cy) * c
        if self.capsule:
            half = max(self.a - self.b, 0.0)
            du = np.clip(np.abs(u) - half, 0.0, None)
            dist = np.hypot(du, v) - self.b
        else:
            q = np.hypot(u / self.a, v / self.b)
            dist = (q - 1.0) * min(self.a, self.b)
        return np.clip(0.5 - dist, 0.0, 1.0)


def random_pills(
    rng: np.random.Generator,
    width: int,
    height: int,
    count: int,
    size_range: tuple[float, float] = (8.0, 22.0),
    margin: float = 0.0,
) -> list[Pill]:
    """Non-overlapping pills whose longest side lies in ``size_range``."""
    pills: list[Pill] = []
    lo, hi = size_range
    for _ in range(count * 500):
        if len(pills) == count:
            break
        length = rng.uniform(lo, hi)
        kind = PILL_NAMES[int(rng.integers(len(PILL_NAMES)))]
        a = length / 2
        b = a if kind == "round" else a * rng.uniform(0.45, 0.8)
        reach = a + 3
        if width - 2 * (margin + reach) <= 0 or height - 2 * (margin + reach) <= 0:
            raise InputError("image too small for the requested objects and margin")
        cx = rng.uniform(margin + reach, width - margin - reach)
        cy = rng.uniform(margin + reach, height - margin - reach)
        if any(math.hypot(cx - p.cx, cy - p.cy) < reach + p.a + 3 for p in pills):
            continue
        angle = rng.uniform(0, math.pi)
        pills.append(Pill(kind, cx, cy, a, b, angle, kind == "capsule"))
    if len(pills) != count:
        raise InputError(f"could not place {count} non-overlapping objects")
    return pills


def pill_labels(pills: list[Pill], width: int, height: int, vertices: int = 24):
    """Ground-truth (boxes, polygons) label sets for a layout."""
    boxes = LabelSet(width, height, tuple(Shape.box(p.name, *p.box()) for p in pills))
    polys = LabelSet(
        width,
        height,
        tuple(Shape(p.name, POLYGON, tuple(map(tuple, p.outline(vertices)))) for p in pills),
    )
    return boxes, polys


def render_texture(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Smooth zero-mean, unit-range background texture."""
    fine = ndimage.gaussian_filter(rng.standard_normal((height, width)), 2.0)
    coarse = ndimage.gaussian_filter(rng.standard_normal((height, width)), 12.0)
    tex = fine / (np.abs(fine).max() + 1e-12) + 0.5 * coarse / (np.abs(coarse).max() + 1e-12)
    return tex / 1.5


def render_band(
    texture: np.ndarray,
    pills: list[Pill],
    contrasts: np.ndarray,
    bit_depth: int = 12,
    base: float = 0.22,
    texture_amp: float = 0.06,
) -> np.ndarray:
    """Intensity image (in the reference frame) of one band."""
    full = (1 << bit_depth) - 1
    h, w = texture.shape
    img = (base + texture_amp * texture) * full
    for pill, k in zip(pills, contrasts):
        x0, y0, x1, y1 = pill.box()
        c0, c1 = max(int(x0) - 2, 0), min(int(math.ceil(x1)) + 3, w)
        r0, r1 = max(int(y0) - 2, 0), min(int(math.ceil(y1)) + 3, h)
        ys, xs = np.mgrid[r0:r1, c0:c1].astype(np.float64)
        cov = pill.coverage(xs, ys)
        level = k * 0.7 * full
        img[r0:r1, c0:c1] = img[r0:r1, c0:c1] * (1 - cov) + level * cov
    return np.clip(img, 0, full)


def add_noise(rng: np.random.Generator, img: np.ndarray, sigma_frac: float, bit_depth: int):
    full = (1 << bit_depth) - 1
    if sigma_frac <= 0:
        return img
    return np.clip(img + rng.normal(0.0, sigma_frac * full, img.shape), 0, full)


@dataclass
class Scene:
    """One synthetic capture: per-band images and labels."""

    images: dict[str, Raster]
    boxes: dict[str, LabelSet]
    polygons: dict[str, LabelSet]


def make_scene(
    rng: np.random.Generator,
    width: int,
    height: int,
    offsets: dict[str, Displacement],
    n_objects: int = 16,
    noise: float = 0.005,
    shift_mode: str = "crop_fill",
    bit_depth: int = 12,
    size_range: tuple[float, float] = (8.0, 22.0),
    vertices: int = 24,
    quantize: bool = True,
) -> Scene:
    """Render a scene for every band in ``offsets`` (reference band: zero offset)."""
    max_off = max((max(abs(d.dx), abs(d.dy)) for d in offsets.values()), default=0.0)
    pills = random_pills(rng, width, height, n_objects, size_range, margin=max_off + 2)
    texture = render_texture(rng, width, height)
    boxes, polys = pill_labels(pills, width, height, vertices)
    ref_frame = render_band(texture, pills, rng.uniform(0.6, 1.0, len(pills)), bit_depth)
    images, band_boxes, band_polys = {}, {}, {}
    for band, d in offsets.items():
        shifted = shift_raster(Raster(ref_frame, bit_depth), d, shift_mode).pixels
        img = add_noise(rng, shifted, noise, bit_depth)
        if quantize:
            img = np.rint(img)
        images[band] = Raster(img, bit_depth)
        band_boxes[band] = translate_labels(boxes, d)
        band_polys[band] = translate_labels(polys, d)
    return Scene(images, band_boxes, band_polys)


# --------------------------------------------------------------------------
# Dataset on disk
# --------------------------------------------------------------------------


@dataclass
class SynthSpec:
    width: int = 640
    height: int = 480
    bands: tuple[str, ...] = ("1", "2", "3", "4", "5")
    reference: str = "5"
    offsets: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "1": (-52.0, 47.0),
            "2": (54.0, 46.0),
            "3": (53.0, -23.0),
            "4": (-52.0, -19.0),
        }
    )
    n_objects: int = 16
    noise: float = 0.005
    seed: int = 0
    n_calibration: int = 4
    n_evaluation: int = 2
    shift_mode: str = "crop_fill"
    bit_depth: int = 12
    vertices: int = 24

    def validate(self) -> dict[str, Displacement]:
        if self.width < 16 or self.height < 16:
            raise InputError("synthetic images must be at least 16x16")
        bands = [str(b) for b in self.bands]
        if len(set(bands)) != len(bands):
            raise InputError("band ids must be unique")
        if str(self.reference) not in bands:
            raise InputError(f"reference band {self.reference} not among {bands}")
        if self.n_objects < 1 or self.n_calibration < 1 or self.n_evaluation < 0:
            raise InputError("object and scene counts must be positive")
        if self.shift_mode not in ("circular", "crop_fill"):
            raise InputError(f"unknown shift mode {self.shift_mode!r}")
        if self.noise < 0:
            raise InputError("noise must be non-negative")
        limit = min(self.width, self.height) / 4
        out = {}
        for b in bands:
            if b == str(self.reference):
                dx, dy = self.offsets.get(b, (0.0, 0.0))
                if (dx, dy) != (0.0, 0.0):
                    raise InputError("the reference band must have offset (0, 0)")
            elif b not in self.offsets:
                raise InputError(f"no offset given for band {b}")
            else:
                dx, dy = self.offsets[b]
            if abs(dx) > limit or abs(dy) > limit:
                raise InputError(f"offset of band {b} exceeds ±{limit:g} px")
            out[b] = Displacement(float(dx), float(dy))
        return out


def image_name(stem: str, band: str, suffix: str = ".png") -> str:
    return f"{stem}__band{band}{suffix}"


def write_dataset(out_dir, spec: SynthSpec) -> Path:
    """Render a dataset and its run manifest; returns the manifest path.

    Layout::

        images/<stem>__band<k>.png          16-bit containers
        annotations/{bb,mask}/<stem>__band<k>.json
        annotations/{bb,mask}/<stem>__rgb.json   labels for the composite
        truth.json, manifest.json
    """
    offsets = spec.validate()
    out = Path(out_dir)
    rng = np.random.default_rng(spec.seed)
    stems = [f"cal{i:03d}" for i in range(spec.n_calibration)] + [
        f"eval{i:03d}" for i in range(spec.n_evaluation)
    ]
    for stem in stems:
        scene = make_scene(
            rng, spec.width, spec.height, offsets, spec.n_objects, spec.noise,
            spec.shift_mode, spec.bit_depth, vertices=spec.vertices,
        )
        for band in offsets:
            img_rel = f"images/{image_name(stem, band)}"
            save_raster(scene.images[band], out / img_rel)
            for kind, sets in (("bb", scene.boxes), ("mask", scene.polygons)):
                write_text_atomic(
                    out / "annotations" / kind / image_name(stem, band, ".json"),
                    emit_labelme(sets[band], f"../../{img_rel}"),
                )
        for kind, sets in (("bb", scene.boxes), ("mask", scene.polygons)):
            write_text_atomic(
                out / "annotations" / kind / f"{stem}__rgb.json",
                emit_labelme(sets[str(spec.reference)], f"{stem}__rgb.png"),
            )

    truth = {
        "reference_band": str(spec.reference),
        "offsets": {b: [d.dx, d.dy] for b, d in offsets.items()},
        "seed": spec.seed,
        "noise": spec.noise,
        "shift_mode": spec.shift_mode,
    }
    write_text_atomic(out / "truth.json", json.dumps(truth, indent=2) + "\n")

    def scene_entry(stem):
        return {
            "stem": stem,
            "images": {b: f"images/{image_name(stem, b)}" for b in offsets},
            "annotations": {
                kind: {b: f"annotations/{kind}/{image_name(stem, b, '.json')}" for b in offsets}
                for kind in ("bb", "mask")
            },
        }

    manifest = {
        "reference_band": str(spec.reference),
        "bands": list(offsets),
        "bit_depth": spec.bit_depth,
        "calibration": [scene_entry(s) for s in stems if s.startswith("cal")],
        "evaluation": [scene_entry(s) for s in stems if s.startswith("eval")],
        "refine": {"n": 5, "scales": [1, 0.1, 0.01], "supersample": 8},
        "output_dir": "out",
    }
    mpath = out / "manifest.json"
    write_text_atomic(mpath, json.dumps(manifest, indent=2) + "\n")
    return mpath
