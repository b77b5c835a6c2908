"""Run manifests: which images and annotations take part in a run.

A manifest is a JSON document; relative paths resolve against the
manifest's own directory::

    {
      "reference_band": "5",
      "bands": ["1", "2", "3", "4", "5"],
      "bit_depth": 12,
      "calibration": [
        {"stem": "cal000",
         "images": {"1": "images/cal000__band1.png", ...},
         "annotations": {"bb": {"1": "...json", ...}, "mask": {...}}}
      ],
      "evaluation": [...],
      "refine": {"n": 5, "scales": [1, 0.1, 0.01], "supersample": 8},
      "rgb_bands": {"red": "3", "green": "2", "blue": "1"},
      "output_dir": "out"
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..compose import DEFAULT_RGB_BANDS
from ..errors import InputError
from ..labels import KIND_BY_FLAG


@dataclass
class SceneFiles:
    stem: str
    images: dict[str, Path]
    annotations: dict[str, dict[str, Path]] = field(default_factory=dict)

    def annotation(self, kind: str, band: str) -> Path:
        try:
            return self.annotations[kind][band]
        except KeyError:
            raise InputError(
                f"scene {self.stem}: no {kind} annotation for band {band}"
            ) from None

    def image(self, band: str) -> Path:
        try:
            return self.images[band]
        except KeyError:
            raise InputError(f"scene {self.stem}: no image for band {band}") from None


@dataclass
class RunManifest:
    reference: str
    bands: list[str]
    calibration: list[SceneFiles]
    evaluation: list[SceneFiles]
    bit_depth: int | None = None
    refine_n: int = 5
    scales: tuple[float, ...] = (1.0, 0.1, 0.01)
    supersample: int = 8
    rgb_bands: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_RGB_BANDS))
    output_dir: Path = Path("out")

    @property
    def target_bands(self) -> list[str]:
        return [b for b in self.bands if b != self.reference]

    @classmethod
    def from_dict(cls, doc: dict, base: Path = Path(".")) -> "RunManifest":
        if not isinstance(doc, dict):
            raise InputError("manifest must be a JSON object")

        def path(p) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        def scenes(key) -> list[SceneFiles]:
            out = []
            for i, raw in enumerate(doc.get(key, [])):
                try:
                    out.append(
                        SceneFiles(
                            stem=str(raw["stem"]),
                            images={str(b): path(p) for b, p in raw["images"].items()},
                            annotations={
                                k: {str(b): path(p) for b, p in m.items()}
                                for k, m in raw.get("annotations", {}).items()
                            },
                        )
                    )
                except (KeyError, TypeError, AttributeError) as exc:
                    raise InputError(f"malformed {key} entry {i} in manifest: {exc}") from exc
            return out

        try:
            reference = str(doc["reference_band"])
            bands = [str(b) for b in doc["bands"]]
        except (KeyError, TypeError) as exc:
            raise InputError(f"manifest lacks {exc}") from exc
        refine = doc.get("refine", {})
        m = cls(
            reference=reference,
            bands=bands,
            calibration=scenes("calibration"),
            evaluation=scenes("evaluation"),
            bit_depth=doc.get("bit_depth"),
            refine_n=int(refine.get("n", 5)),
            scales=tuple(float(s) for s in refine.get("scales", (1.0, 0.1, 0.01))),
            supersample=int(refine.get("supersample", 8)),
            rgb_bands={**DEFAULT_RGB_BANDS, **doc.get("rgb_bands", {})},
            output_dir=path(doc.get("output_dir", "out")),
        )
        m.validate()
        return m

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed manifest {path}: {exc}") from exc
        return cls.from_dict(doc, path.parent)

    def validate(self) -> None:
        if self.reference not in self.bands:
            raise InputError(f"reference band {self.reference} is not listed in bands")
        if len(set(self.bands)) != len(self.bands):
            raise InputError("band ids must be unique")
        if self.bit_depth not in (None, 8, 12, 16):
            raise InputError(f"unsupported bit depth {self.bit_depth}")
        cal_stems = {s.stem for s in self.calibration}
        eval_stems = {s.stem for s in self.evaluation}
        if len(cal_stems) != len(self.calibration) or len(eval_stems) != len(self.evaluation):
            raise InputError("scene stems must be unique within a split")
        if cal_stems & eval_stems:
            raise InputError(
                f"calibration and evaluation splits overlap: {sorted(cal_stems & eval_stems)}"
            )
        cal_files = {p for s in self.calibration for p in s.images.values()}
        eval_files = {p for s in self.evaluation for p in s.images.values()}
        if cal_files & eval_files:
            raise InputError("calibration and evaluation splits share image files")
        for scene in self.calibration + self.evaluation:
            for band in self.bands:
                if band not in scene.images:
                    raise InputError(f"scene {scene.stem} has no image for band {band}")
            for kind, per_band in scene.annotations.items():
                if kind not in KIND_BY_FLAG:
                    raise InputError(f"unknown annotation kind {kind!r} in scene {scene.stem}")
                for p in per_band.values():
                    if not p.exists():
                        raise InputError(f"missing annotation file {p}")
            for p in scene.images.values():
                if not p.exists():
                    raise InputError(f"missing image file {p}")
