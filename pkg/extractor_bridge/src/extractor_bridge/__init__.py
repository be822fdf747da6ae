"""File-level bridge between plain images and the localization toolkit.

Exports pixel-level feature maps (PXF1) from images via local patch
extractors, converts annotation images to label masks (PXM1), and runs
a classical promptable segmenter over exported prompt JSON files.
"""

__version__ = "0.1.0"

from .errors import BridgeError, InputError, PromptError
from .extractors import ExportJob, export_features, patch_grid, resolve_extractor
from .files import (
    read_feature_map,
    read_label_mask,
    upsample_bilinear,
    write_feature_map,
    write_label_mask,
)
from .images import convert_mask, load_image
from .segmenter import grow_region, pick_tolerance, read_prompts, refine_with_segmenter

__all__ = [name for name in dir() if not name.startswith("_")]
