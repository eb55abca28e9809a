from .samples import (
    GraspSample,
    GroundTruthMaps,
    DEFAULT_WIDTH_SCALE,
    rasterize_labels,
    augment,
    center_crop,
    modality_channels,
    normalize_inputs,
    split,
)
from .cornell import load_cornell
from .jacquard import load_jacquard

__all__ = [
    "GraspSample",
    "GroundTruthMaps",
    "DEFAULT_WIDTH_SCALE",
    "rasterize_labels",
    "augment",
    "center_crop",
    "modality_channels",
    "normalize_inputs",
    "split",
    "load_cornell",
    "load_jacquard",
]
