"""Band registration and label transfer for multilens (multispectral) cameras."""

from .annotio import (
    RegistryEntry,
    TransformRegistry,
    emit_labelme,
    load_registry,
    parse_labelme,
    save_registry,
)
from .compose import BandAssignment, back_transfer_labels, compose_rgb
from .errors import InputError, RegistrationError
from .labels import (
    LabelSet,
    MatchReport,
    Shape,
    iou_bb,
    iou_polygon,
    match_and_score,
    translate_labels,
)
from .raster import Displacement, Raster, load_raster, normalize_to_display, save_raster, shift_raster
from .refine import CalibrationPair, RefineConfig, RefinedTransform, candidate_grid, refine_displacement
from .spectral import phase_correlate

__version__ = "0.1.0"

__all__ = [
    "BandAssignment",
    "CalibrationPair",
    "Displacement",
    "InputError",
    "LabelSet",
    "MatchReport",
    "Raster",
    "RefineConfig",
    "RefinedTransform",
    "RegistrationError",
    "RegistryEntry",
    "Shape",
    "TransformRegistry",
    "back_transfer_labels",
    "candidate_grid",
    "compose_rgb",
    "emit_labelme",
    "iou_bb",
    "iou_polygon",
    "load_raster",
    "load_registry",
    "match_and_score",
    "normalize_to_display",
    "parse_labelme",
    "phase_correlate",
    "refine_displacement",
    "save_raster",
    "save_registry",
    "shift_raster",
    "translate_labels",
]
