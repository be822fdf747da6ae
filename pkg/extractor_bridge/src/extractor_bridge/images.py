"""Loading plain images and converting annotation images to label masks."""

from pathlib import Path

import matplotlib.image
import numpy as np

from . import files
from .errors import InputError

# Rec. 601 luma weights for collapsing color images to one channel.
_LUMA = np.array([0.299, 0.587, 0.114])


def load_image(path: str | Path) -> np.ndarray:
    """Read an image as a 2-D float array.

    Accepts PNG (via matplotlib), .npy arrays, and single-channel PXF1
    feature files (the localization toolkit stores intensity images
    that way). Color images are collapsed with Rec. 601 luma weights.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such image: {path}")
    suffix = path.suffix.lower()
    try:
        if suffix == ".npy":
            data = np.load(path)
        elif suffix == ".pxf":
            data = files.read_feature_map(path)
            if data.shape[2] != 1:
                raise InputError(f"{path}: expected a single-channel image, got {data.shape[2]}")
            data = data[:, :, 0]
        else:
            data = matplotlib.image.imread(path)
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc

    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        data = data[:, :, :3] @ _LUMA
    if data.ndim != 2 or data.size == 0:
        raise InputError(f"{path}: expected a 2-D image, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise InputError(f"{path}: image contains NaN or Inf")
    return data


def convert_mask(image_path: str | Path, out_path: str | Path) -> Path:
    """Turn an annotation image into a PXM1 label mask.

    Distinct pixel values become labels by rank: the smallest value maps
    to background 0, the rest to 1..L in increasing order. 8-bit PNG
    values are first restored to 0..255 so that exports from common
    annotation tools survive matplotlib's 1/255 scaling.
    """
    data = load_image(image_path)
    if data.max() <= 1.0:
        data = np.round(data * 255.0)
    values = np.unique(data)
    if len(values) > 256:
        raise InputError(f"{image_path}: {len(values)} distinct values is not a label image")
    labels = np.searchsorted(values, data).astype(np.uint8)
    return files.write_label_mask(labels, len(values) - 1, out_path)
