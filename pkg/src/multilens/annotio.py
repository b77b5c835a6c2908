"""LabelMe annotation files and the persisted transform registry."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import InputError
from .labels import BOUNDING_BOX, KIND_BY_FLAG, FLAG_BY_KIND, POLYGON, LabelSet, Shape
from .raster import IDENTITY, Displacement

LABELME_VERSION = "5.4.1"
REGISTRY_SCHEMA_VERSION = 1

_SHAPE_TYPE_TO_KIND = {"rectangle": BOUNDING_BOX, "polygon": POLYGON}
_KIND_TO_SHAPE_TYPE = {v: k for k, v in _SHAPE_TYPE_TO_KIND.items()}


def write_text_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# LabelMe
# --------------------------------------------------------------------------


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise InputError(f"missing required field {key!r} in {where}")
    return obj[key]


def _parse_points(raw, where: str) -> list[tuple[float, float]]:
    if not isinstance(raw, list):
        raise InputError(f"'points' must be a list in {where}")
    pts = []
    for p in raw:
        if not (isinstance(p, (list, tuple)) and len(p) == 2):
            raise InputError(f"malformed point {p!r} in {where}")
        try:
            pts.append((float(p[0]), float(p[1])))
        except (TypeError, ValueError) as exc:
            raise InputError(f"non-numeric point {p!r} in {where}") from exc
    return pts


def parse_labelme(document: str) -> LabelSet:
    """Build a LabelSet from LabelMe JSON text.

    Rectangles become bounding boxes with ordered corners; polygons are
    kept as-is. Any other ``shape_type`` is rejected. Unknown top-level
    fields are ignored.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("LabelMe document must be a JSON object")
    raw_shapes = _require(doc, "shapes", "document")
    if not isinstance(raw_shapes, list):
        raise InputError("'shapes' must be a list")
    width = _require(doc, "imageWidth", "document")
    height = _require(doc, "imageHeight", "document")
    if not (isinstance(width, int) and isinstance(height, int)):
        raise InputError("imageWidth/imageHeight must be integers")

    shapes = []
    for i, raw in enumerate(raw_shapes):
        where = f"shape {i}"
        if not isinstance(raw, dict):
            raise InputError(f"{where} is not an object")
        label = _require(raw, "label", where)
        pts = _parse_points(_require(raw, "points", where), where)
        shape_type = _require(raw, "shape_type", where)
        kind = _SHAPE_TYPE_TO_KIND.get(shape_type)
        if kind is None:
            raise InputError(f"unsupported shape_type {shape_type!r} in {where}")
        if kind == BOUNDING_BOX:
            if len(pts) != 2:
                raise InputError(f"rectangle needs exactly 2 points in {where}")
            (xa, ya), (xb, yb) = pts
            pts = [(min(xa, xb), min(ya, yb)), (max(xa, xb), max(ya, yb))]
        elif len(pts) < 3:
            raise InputError(f"polygon needs at least 3 points in {where}")
        shapes.append(Shape(str(label), kind, tuple(pts)))
    return LabelSet(width, height, tuple(shapes))


def emit_labelme(ls: LabelSet, image_path: str) -> str:
    """Serialize to LabelMe JSON; output is deterministic and floats are
    written with round-trip precision."""
    doc = {
        "version": LABELME_VERSION,
        "flags": {},
        "shapes": [
            {
                "label": s.name,
                "points": [[x, y] for x, y in s.points],
                "group_id": None,
                "shape_type": _KIND_TO_SHAPE_TYPE[s.kind],
                "flags": {},
            }
            for s in ls.shapes
        ],
        "imagePath": image_path,
        "imageData": None,
        "imageHeight": ls.image_height,
        "imageWidth": ls.image_width,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def read_labelme(path) -> LabelSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read annotation {path}: {exc}") from exc
    try:
        return parse_labelme(text)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_labelme(ls: LabelSet, path, image_path: str) -> None:
    write_text_atomic(path, emit_labelme(ls, image_path))


# --------------------------------------------------------------------------
# Transform registry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RegistryEntry:
    displacement: Displacement
    mean_iou: float
    elapsed_ms: float = 0.0
    calibration_images: int = 0
    created_at: str = ""

    def __post_init__(self):
        if not self.displacement.is_finite():
            raise InputError(f"registry displacement {self.displacement} is not finite")
        if not (0.0 <= self.mean_iou <= 1.0):
            raise InputError(f"registry mean_iou {self.mean_iou} outside [0, 1]")


def _norm_kind(kind: str) -> str:
    """Registry keys use the short flags ``bb`` / ``mask``."""
    if kind in KIND_BY_FLAG:
        return kind
    if kind in FLAG_BY_KIND:
        return FLAG_BY_KIND[kind]
    raise InputError(f"unknown label kind {kind!r}")


def registry_key(src, dst, kind: str) -> str:
    return f"{src}→{dst}/{_norm_kind(kind)}"


def _split_key(key: str) -> tuple[str, str, str]:
    try:
        bands, kind = key.rsplit("/", 1)
        src, dst = bands.split("→")
    except ValueError:
        raise InputError(f"malformed registry key {key!r}") from None
    return src, dst, _norm_kind(kind)


class TransformRegistry:
    """Displacements from a source band to a target band, per label kind.

    Band ids are stored as strings. Looking up a band against itself
    always yields the identity without a stored entry.
    """

    def __init__(self):
        self._entries: dict[tuple[str, str, str], RegistryEntry] = {}

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        src, dst, kind = key
        return str(src) == str(dst) or (str(src), str(dst), _norm_kind(kind)) in self._entries

    def __eq__(self, other):
        if not isinstance(other, TransformRegistry):
            return NotImplemented
        return self._entries == other._entries

    def items(self):
        return sorted(self._entries.items())

    def put(self, src, dst, kind: str, entry: RegistryEntry, replace: bool = True) -> None:
        key = (str(src), str(dst), _norm_kind(kind))
        if not replace and key in self._entries:
            raise InputError(f"duplicate registry entry {registry_key(*key)}")
        self._entries[key] = entry

    def entry(self, src, dst, kind: str) -> RegistryEntry:
        src, dst = str(src), str(dst)
        if src == dst:
            return RegistryEntry(IDENTITY, 1.0)
        try:
            return self._entries[(src, dst, _norm_kind(kind))]
        except KeyError:
            raise InputError(
                f"no registry entry for {registry_key(src, dst, kind)}"
            ) from None

    def get(self, src, dst, kind: str) -> Displacement:
        return self.entry(src, dst, kind).displacement

    def to_json(self) -> str:
        entries = {}
        for (src, dst, kind), e in self.items():
            entries[registry_key(src, dst, kind)] = {
                "dx": e.displacement.dx,
                "dy": e.displacement.dy,
                "mean_iou": e.mean_iou,
                "elapsed_ms": e.elapsed_ms,
                "calibration_images": e.calibration_images,
                "created_at": e.created_at,
            }
        doc = {"schema_version": REGISTRY_SCHEMA_VERSION, "entries": entries}
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TransformRegistry":
        def no_duplicates(pairs):
            seen = {}
            for k, v in pairs:
                if k in seen:
                    raise InputError(f"duplicate key {k!r} in registry file")
                seen[k] = v
            return seen

        try:
            doc = json.loads(text, object_pairs_hook=no_duplicates)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed registry JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("schema_version") != REGISTRY_SCHEMA_VERSION:
            raise InputError(
                f"registry schema_version must be {REGISTRY_SCHEMA_VERSION}, "
                f"got {doc.get('schema_version') if isinstance(doc, dict) else None!r}"
            )
        reg = cls()
        for key, raw in _require(doc, "entries", "registry").items():
            src, dst, kind = _split_key(key)
            try:
                entry = RegistryEntry(
                    Displacement(float(raw["dx"]), float(raw["dy"])),
                    float(raw["mean_iou"]),
                    float(raw.get("elapsed_ms", 0.0)),
                    int(raw.get("calibration_images", 0)),
                    str(raw.get("created_at", "")),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed registry entry {key!r}: {exc}") from exc
            reg.put(src, dst, kind, entry, replace=False)
        return reg


def save_registry(r: TransformRegistry, path) -> None:
    write_text_atomic(path, r.to_json())


def load_registry(path) -> TransformRegistry:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read registry {path}: {exc}") from exc
    return TransformRegistry.from_json(text)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
