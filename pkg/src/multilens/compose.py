"""Artificial RGB composition and label back-transfer.

Three bands are warped into the reference band's frame with the inverse of
their registered translation and stacked as R, G, B. Labels drawn on that
composite live in the reference frame, so the forward translations carry
them back to every band.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .annotio import TransformRegistry
from .errors import InputError
from .labels import LabelSet, translate_labels
from .raster import IDENTITY, Displacement, Raster, normalize_to_display, shift_raster

# default colour mapping of the five-band module (blue 475, green 560, red 668 nm)
DEFAULT_RGB_BANDS = {"red": "3", "green": "2", "blue": "1"}


@dataclass(frozen=True)
class BandAssignment:
    """Which band feeds each colour channel and its reference->band shift."""

    reference: str
    red: tuple[str, Displacement]
    green: tuple[str, Displacement]
    blue: tuple[str, Displacement]

    def __post_init__(self):
        ids = [self.red[0], self.green[0], self.blue[0]]
        if len(set(ids)) != 3:
            raise InputError(f"colour channels need three distinct bands, got {ids}")
        for band, d in (self.red, self.green, self.blue):
            if d is None:
                raise InputError(f"missing transform for band {band}")
            if band == self.reference and d != IDENTITY:
                raise InputError("the reference band's transform must be the identity")

    @classmethod
    def from_registry(
        cls,
        registry: TransformRegistry,
        reference,
        kind: str,
        red=DEFAULT_RGB_BANDS["red"],
        green=DEFAULT_RGB_BANDS["green"],
        blue=DEFAULT_RGB_BANDS["blue"],
    ) -> "BandAssignment":
        ref = str(reference)
        return cls(
            ref,
            *((str(b), registry.get(ref, str(b), kind)) for b in (red, green, blue)),
        )

    @property
    def channels(self) -> tuple[tuple[str, Displacement], ...]:
        return (self.red, self.green, self.blue)


def align_to_reference(band: Raster, d: Displacement) -> Raster:
    """Undo the reference->band translation; uncovered pixels become 0."""
    return shift_raster(band, -d, mode="crop_fill", fill=0.0)


def compose_rgb(bands: Sequence[Raster], assign: BandAssignment) -> np.ndarray:
    """Stack three bands (ordered red, green, blue) into an (H, W, 3) uint8
    image aligned with the reference band."""
    if len(bands) != 3:
        raise InputError(f"compose_rgb needs 3 bands, got {len(bands)}")
    shape = bands[0].shape
    if any(b.shape != shape for b in bands):
        raise InputError("bands differ in size")
    channels = [
        normalize_to_display(align_to_reference(b, d)).pixels
        for b, (_, d) in zip(bands, assign.channels)
    ]
    return np.stack(channels, axis=-1).astype(np.uint8)


def back_transfer_labels(
    rgb_labels: LabelSet,
    registry: TransformRegistry,
    bands: Iterable,
    reference,
    kind: str,
) -> dict[str, LabelSet]:
    """Carry labels drawn on the composite into each requested band."""
    out = {}
    for band in bands:
        band = str(band)
        d = registry.get(str(reference), band, kind)
        out[band] = rgb_labels if band == str(reference) else translate_labels(rgb_labels, d)
    return out
