"""Local deterministic patch-feature extractors and the export job.

Real deployments would register a pretrained patch-embedding backbone
here; the two built-ins compute classical per-patch descriptors so that
the export path runs anywhere, with no weights to download, and stays
bit-reproducible. Both behave like the backbones they stand in for:
non-overlapping square patches, one feature vector per patch, the patch
grid bilinearly upsampled to the requested pixel resolution.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from . import files, images
from .errors import InputError


@dataclass(frozen=True)
class ExportJob:
    """One batch of images to turn into feature-map files."""

    images: tuple[str, ...]
    extractor: str = "patch-moments"
    output_dir: str = "features"
    resolution: tuple[int, int] = (64, 64)

    def __post_init__(self) -> None:
        if not self.images:
            raise InputError("export job lists no images")
        if len(self.resolution) != 2 or min(self.resolution) < 1:
            raise InputError(f"bad target resolution {self.resolution}")


class PatchMoments:
    """Intensity statistics + gradient-orientation histogram per patch.

    Channels: mean, std, min, max, gradient-magnitude mean and std,
    4 orientation bins over [0, pi) weighted by magnitude, and the
    intensity centroid (row, col) in patch-relative units.
    """

    dim = 12

    def __init__(self, patch_size: int = 14):
        self.patch_size = patch_size

    def __call__(self, patch: np.ndarray) -> np.ndarray:
        gy, gx = np.gradient(patch)
        magnitude = np.hypot(gy, gx)
        orientation = np.arctan2(gy, gx) % np.pi
        bins = np.zeros(4)
        idx = np.minimum((orientation / np.pi * 4).astype(int), 3)
        np.add.at(bins, idx.ravel(), magnitude.ravel())
        bins /= patch.size

        mass = patch.sum()
        if mass > 0:
            rows, cols = np.indices(patch.shape)
            centroid = ((rows * patch).sum() / mass, (cols * patch).sum() / mass)
            centroid = (centroid[0] / self.patch_size, centroid[1] / self.patch_size)
        else:
            centroid = (0.5, 0.5)

        return np.array([
            patch.mean(), patch.std(), patch.min(), patch.max(),
            magnitude.mean(), magnitude.std(),
            *bins, *centroid,
        ])


class PatchDct:
    """Low-frequency block-DCT coefficients per patch (top-left k x k)."""

    def __init__(self, patch_size: int = 14, k: int = 4):
        self.patch_size = patch_size
        self.k = k
        self.dim = k * k

    def __call__(self, patch: np.ndarray) -> np.ndarray:
        coeffs = scipy.fft.dctn(patch, norm="ortho")
        return coeffs[: self.k, : self.k].ravel().copy()


_REGISTRY = {
    "patch-moments": PatchMoments,
    "patch-dct": PatchDct,
}


def resolve_extractor(identifier: str):
    """Look an extractor up by name; unknown names fail like a missing model."""
    try:
        return _REGISTRY[identifier]()
    except KeyError:
        raise InputError(
            f"cannot load extractor {identifier!r}; available: {sorted(_REGISTRY)}"
        ) from None


def patch_grid(extractor, image: np.ndarray) -> np.ndarray:
    """Run the extractor over non-overlapping patches.

    Images whose sides are not multiples of the patch size are
    center-cropped to the largest patch multiple, mirroring how
    patch-embedding backbones consume fixed grids.
    """
    p = extractor.patch_size
    gh, gw = image.shape[0] // p, image.shape[1] // p
    if gh == 0 or gw == 0:
        raise InputError(
            f"image {image.shape} is smaller than the {p}-pixel patch size"
        )
    r0 = (image.shape[0] - gh * p) // 2
    c0 = (image.shape[1] - gw * p) // 2
    grid = np.empty((gh, gw, extractor.dim))
    for i in range(gh):
        for j in range(gw):
            patch = image[r0 + i * p : r0 + (i + 1) * p, c0 + j * p : c0 + (j + 1) * p]
            grid[i, j] = extractor(patch)
    return grid


def export_features(job: ExportJob) -> list[Path]:
    """Write one PXF1 feature map per image at the requested resolution.

    Also drops an `export_manifest.json` next to the outputs recording
    the extractor, patch size, channel count, and per-image files.
    """
    extractor = resolve_extractor(job.extractor)
    out_h, out_w = job.resolution
    if min(job.resolution) < extractor.patch_size:
        raise InputError(
            f"target resolution {job.resolution} is below the "
            f"{extractor.patch_size}-pixel patch size"
        )
    out_dir = Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    for image_path in job.images:
        image = images.load_image(image_path)
        grid = patch_grid(extractor, image)
        pixels = files.upsample_bilinear(grid, out_h, out_w)
        written.append(
            files.write_feature_map(
                pixels.astype(np.float32), out_dir / f"{Path(image_path).stem}.features.pxf"
            )
        )

    manifest = {
        "extractor": job.extractor,
        "patch_size": extractor.patch_size,
        "dim": extractor.dim,
        "resolution": list(job.resolution),
        "files": [p.name for p in written],
    }
    (out_dir / "export_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return written
