"""Readers/writers for the exchange file formats.

Deliberately self-contained: this package talks to the localization
toolkit through files only, so the byte layout is implemented here from
the contract rather than imported.

Feature map ("PXF1"): magic, then height/width/dim as little-endian u32,
then height*width*dim little-endian float32, row-major, channel-fastest.
Label mask ("PXM1"): magic, then height/width/label_count as u32, then
height*width unsigned bytes.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import InputError

FEATURE_MAGIC = b"PXF1"
MASK_MAGIC = b"PXM1"


def write_feature_map(data: np.ndarray, path: str | Path) -> Path:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 3:
        raise InputError(f"feature map must be H x W x D, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise InputError("feature map contains NaN or Inf")
    h, w, d = data.shape
    path = Path(path)
    path.write_bytes(
        FEATURE_MAGIC + struct.pack("<3I", h, w, d) + data.astype("<f4").tobytes()
    )
    return path


def read_feature_map(path: str | Path) -> np.ndarray:
    body = _payload(path, FEATURE_MAGIC)
    if len(body) < 12:
        raise InputError(f"{path}: truncated header")
    h, w, d = struct.unpack_from("<3I", body)
    values = body[12:]
    if len(values) != h * w * d * 4:
        raise InputError(f"{path}: payload size does not match {h}x{w}x{d} header")
    data = np.frombuffer(values, dtype="<f4").reshape(h, w, d)
    if not np.isfinite(data).all():
        raise InputError(f"{path}: feature map contains NaN or Inf")
    return data.astype(np.float32)


def write_label_mask(labels: np.ndarray, label_count: int, path: str | Path) -> Path:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InputError(f"label mask must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() > label_count or label_count > 255:
        raise InputError(f"labels must lie in 0..{label_count} (and fit a byte)")
    h, w = labels.shape
    path = Path(path)
    path.write_bytes(
        MASK_MAGIC + struct.pack("<3I", h, w, label_count) + labels.astype(np.uint8).tobytes()
    )
    return path


def read_label_mask(path: str | Path) -> tuple[np.ndarray, int]:
    body = _payload(path, MASK_MAGIC)
    if len(body) < 12:
        raise InputError(f"{path}: truncated header")
    h, w, label_count = struct.unpack_from("<3I", body)
    values = body[12:]
    if len(values) != h * w:
        raise InputError(f"{path}: payload size does not match {h}x{w} header")
    labels = np.frombuffer(values, dtype=np.uint8).reshape(h, w)
    if labels.max(initial=0) > label_count:
        raise InputError(f"{path}: label exceeds declared count {label_count}")
    return labels.copy(), label_count


def _payload(path: str | Path, magic: bytes) -> bytes:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    blob = path.read_bytes()
    if blob[:4] != magic:
        raise InputError(f"{path}: expected magic {magic!r}, found {blob[:4]!r}")
    return blob[4:]


def upsample_bilinear(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a patch grid to pixel resolution.

    Half-pixel-centre convention with border clamping: output index i
    samples the source at (i + 0.5) * in/out - 0.5. This must agree
    with the localization toolkit's own interpolation (the tests check
    it to 1e-5), otherwise exported features would be misaligned.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 3:
        raise InputError(f"patch grid must be H x W x D, got shape {grid.shape}")
    if out_h < 1 or out_w < 1:
        raise InputError(f"output size must be positive, got {out_h}x{out_w}")
    in_h, in_w, _ = grid.shape

    def axis_coords(out_n: int, in_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.clip((np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5, 0.0, in_n - 1.0)
        lo = src.astype(int)
        hi = np.minimum(lo + 1, in_n - 1)
        return lo, hi, src - lo

    r_lo, r_hi, r_f = axis_coords(out_h, in_h)
    c_lo, c_hi, c_f = axis_coords(out_w, in_w)
    top = grid[r_lo][:, c_lo] * (1 - c_f)[None, :, None] + grid[r_lo][:, c_hi] * c_f[None, :, None]
    bottom = grid[r_hi][:, c_lo] * (1 - c_f)[None, :, None] + grid[r_hi][:, c_hi] * c_f[None, :, None]
    return top * (1 - r_f)[:, None, None] + bottom * r_f[:, None, None]
