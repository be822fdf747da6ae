"""Pixel feature maps, label masks, and their binary on-disk formats.

Feature-map file (PXF1): magic ``PXF1``, three u32 little-endian header
fields (height, width, dim), then height*width*dim float32 little-endian
values, row-major with the channel axis fastest.  Label-mask file (PXM1):
magic ``PXM1``, u32 (height, width, label_count), then height*width
unsigned bytes.  Both round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DataError,
    LabelRangeError,
    NonFiniteValueError,
    TruncatedPayloadError,
)

FEATURE_MAGIC = b"PXF1"
MASK_MAGIC = b"PXM1"
_HEADER = struct.Struct("<III")


@dataclass(frozen=True)
class FeatureMap:
    """H x W grid of D-dimensional pixel feature vectors (float32)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise DataError(f"feature map must be (H, W, D), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise DataError(f"feature map dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("feature map contains NaN or Inf components")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchGrid:
    """Patch-level feature grid, the pre-interpolation representation."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DataError(f"patch grid must be (rows, cols, D) with all >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("patch grid contains NaN or Inf components")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMask:
    """H x W integer label grid: 0 is background, 1..label_count are RoIs."""

    labels: np.ndarray
    label_count: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DataError(f"label mask must be (H, W) with all >= 1, got {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise DataError("mask labels must fit in an unsigned byte")
        arr = arr.astype(np.uint8)
        if not 0 <= self.label_count <= 255:
            raise DataError(f"label_count must be in [0, 255], got {self.label_count}")
        if arr.size and int(arr.max()) > self.label_count:
            raise LabelRangeError(
                f"mask contains label {int(arr.max())} above declared label_count {self.label_count}"
            )
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def _read_payload(path: str | Path, magic: bytes) -> tuple[tuple[int, int, int], bytes]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    blob = path.read_bytes()
    if blob[:4] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, got {blob[:4]!r}")
    if len(blob) < 4 + _HEADER.size:
        raise TruncatedPayloadError(f"{path}: header truncated")
    dims = _HEADER.unpack_from(blob, 4)
    return dims, blob[4 + _HEADER.size :]


def read_feature_map(path: str | Path) -> FeatureMap:
    """Read a PXF1 file; errors distinguish missing file, bad magic,
    truncation, and non-finite payloads."""
    (h, w, d), payload = _read_payload(path, FEATURE_MAGIC)
    if min(h, w, d) < 1:
        raise TruncatedPayloadError(f"{path}: header declares degenerate shape {(h, w, d)}")
    expected = h * w * d * 4
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, d)
    if not np.isfinite(arr).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    return FeatureMap(arr.copy())


def write_feature_map(fmap: FeatureMap, path: str | Path) -> None:
    """Write a PXF1 file decodable back to an identical map."""
    blob = FEATURE_MAGIC + _HEADER.pack(fmap.height, fmap.width, fmap.dim)
    blob += fmap.data.astype("<f4").tobytes()
    Path(path).write_bytes(blob)


def read_label_mask(path: str | Path) -> LabelMask:
    """Read a PXM1 file; label values above the declared count are rejected."""
    (h, w, label_count), payload = _read_payload(path, MASK_MAGIC)
    if min(h, w) < 1:
        raise TruncatedPayloadError(f"{path}: header declares degenerate shape {(h, w)}")
    if len(payload) != h * w:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, header declares {h * w}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return LabelMask(arr.copy(), label_count)


def write_label_mask(mask: LabelMask, path: str | Path) -> None:
    """Write a PXM1 file decodable back to an identical mask."""
    blob = MASK_MAGIC + _HEADER.pack(mask.height, mask.width, mask.label_count)
    blob += mask.labels.astype(np.uint8).tobytes()
    Path(path).write_bytes(blob)


def _linear_indices(in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Pixel centers at (i + 0.5)/out of the source extent (align-corners-false),
    # with border clamping.
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    lo = np.floor(src).astype(np.int64)
    t = src - lo
    lo_c = np.clip(lo, 0, in_size - 1)
    hi_c = np.clip(lo + 1, 0, in_size - 1)
    return lo_c, hi_c, t


def interpolate_patch_grid(grid: PatchGrid, out_height: int, out_width: int) -> FeatureMap:
    """Bilinearly upsample a patch grid to pixel resolution, channel-wise."""
    if out_height < 1 or out_width < 1:
        raise DataError(f"output shape must be >= 1x1, got {out_height}x{out_width}")
    data = grid.data.astype(np.float64)
    r0, r1, tr = _linear_indices(grid.rows, out_height)
    c0, c1, tc = _linear_indices(grid.cols, out_width)
    rows = data[r0] * (1.0 - tr)[:, None, None] + data[r1] * tr[:, None, None]
    out = rows[:, c0] * (1.0 - tc)[None, :, None] + rows[:, c1] * tc[None, :, None]
    return FeatureMap(out.astype(np.float32))


def l2_normalize(fmap: FeatureMap, epsilon: float = 1e-8) -> FeatureMap:
    """Scale each pixel vector to unit norm; vectors below epsilon become zero."""
    if epsilon <= 0:
        raise DataError(f"epsilon must be > 0, got {epsilon}")
    data = fmap.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=-1, keepdims=True)
    out = np.where(norms < epsilon, 0.0, data / np.where(norms == 0.0, 1.0, norms))
    return FeatureMap(out.astype(np.float32))
