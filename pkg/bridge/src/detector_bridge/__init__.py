"""Exporters from detector-side artifacts to the counting pipeline's formats."""

from .convert import (
    ConversionError,
    LabelmeDocument,
    convert_labelme,
    export_detections,
    load_dump,
)
from .masks import decode_mask, largest_component, mask_to_polygon

__all__ = [
    "ConversionError",
    "LabelmeDocument",
    "convert_labelme",
    "export_detections",
    "load_dump",
    "decode_mask",
    "largest_component",
    "mask_to_polygon",
]

__version__ = "0.1.0"
