"""Post-processing between localization and refinement: connected-component
cleanup, landmark extraction, prompt selection, the prompt-file bridge, and
a deterministic flood-fill stand-in for an external promptable segmenter.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError, PipelineError
from .formats import LabelMask, read_label_mask

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class PromptSet:
    """Pixel coordinates drawn from one localized region."""

    label: int
    points: np.ndarray  # (n, 2) int, (row, col)

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RefinerRequest:
    """Prompt payload handed to a promptable segmenter (real or mock)."""

    image: str
    height: int
    width: int
    prompts: tuple[PromptSet, ...]

    def __post_init__(self) -> None:
        if not self.prompts:
            raise DataError("refiner request needs at least one prompt set")
        for ps in self.prompts:
            if ps.count == 0:
                raise DataError(f"prompt set for label {ps.label} is empty")
            rows, cols = ps.points[:, 0], ps.points[:, 1]
            if rows.min() < 0 or cols.min() < 0 or rows.max() >= self.height or cols.max() >= self.width:
                raise DataError(f"prompt for label {ps.label} lies outside {self.height}x{self.width}")


def filter_components(mask: LabelMask, connectivity: int = 8, min_size: int = 5) -> LabelMask:
    """Drop connected components smaller than min_size, per label independently."""
    if connectivity not in _STRUCTURES:
        raise DataError(f"connectivity must be 4 or 8, got {connectivity}")
    if min_size < 0:
        raise DataError(f"min_size must be >= 0, got {min_size}")
    out = mask.labels.copy()
    for label in range(1, mask.label_count + 1):
        binary = mask.labels == label
        if not binary.any():
            continue
        comp, n = ndimage.label(binary, structure=_STRUCTURES[connectivity])
        sizes = np.bincount(comp.ravel(), minlength=n + 1)
        small = sizes < min_size
        small[0] = False
        out[small[comp] & binary] = 0
    return LabelMask(out, mask.label_count)


def largest_component(mask: LabelMask, label: int, connectivity: int = 8) -> np.ndarray | None:
    """Boolean grid of the label's largest component (ties: first in scan order)."""
    binary = mask.labels == label
    if not binary.any():
        return None
    comp, n = ndimage.label(binary, structure=_STRUCTURES[connectivity])
    sizes = np.bincount(comp.ravel(), minlength=n + 1)
    sizes[0] = 0
    return comp == sizes.argmax()


def landmark_from_mask(
    mask: LabelMask, label: int, connectivity: int = 8
) -> tuple[int, int] | None:
    """Centroid of the label's largest component, rounded to the nearest
    pixel (half up); None when the label is absent — a true-negative slice."""
    component = largest_component(mask, label, connectivity)
    if component is None:
        return None
    rows, cols = np.nonzero(component)
    return int(np.floor(rows.mean() + 0.5)), int(np.floor(cols.mean() + 0.5))


def select_prompts(mask: LabelMask, label: int, n: int, seed: int = 0) -> PromptSet:
    """min(n, region size) distinct pixels, uniform without replacement."""
    if n < 1:
        raise DataError(f"prompt count must be >= 1, got {n}")
    rows, cols = np.nonzero(mask.labels == label)
    if len(rows) == 0:
        raise PipelineError(f"label {label} has no localized region to prompt from")
    coords = np.stack([rows, cols], axis=1).astype(np.int64)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(coords), size=min(n, len(coords)), replace=False)
    return PromptSet(label, coords[np.sort(picked)])


def mock_refine(intensity: np.ndarray, prompts: PromptSet, tolerance: float) -> LabelMask:
    """Union of 8-connected region growths seeded at each prompt point.

    A pixel joins a growth when its intensity differs from that seed's
    intensity by at most `tolerance`. Deterministic stand-in for the real
    promptable segmenter.
    """
    intensity = np.asarray(intensity, dtype=np.float64)
    if intensity.ndim != 2:
        raise DataError(f"intensity image must be 2-D, got shape {intensity.shape}")
    if tolerance < 0:
        raise DataError(f"tolerance must be >= 0, got {tolerance}")
    h, w = intensity.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for r, c in prompts.points:
        if not (0 <= r < h and 0 <= c < w):
            raise DataError(f"prompt ({r}, {c}) lies outside {h}x{w}")
        grown = np.abs(intensity - intensity[r, c]) <= tolerance
        comp, _ = ndimage.label(grown, structure=_STRUCTURES[8])
        out[comp == comp[r, c]] = 1
    return LabelMask(out, 1)


def bfs_components(binary: np.ndarray, connectivity: int = 8) -> list[set[tuple[int, int]]]:
    """Plain breadth-first component enumeration; the independent oracle for
    the scipy-backed labeling used elsewhere."""
    if connectivity not in (4, 8):
        raise DataError(f"connectivity must be 4 or 8, got {connectivity}")
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    h, w = binary.shape
    seen = np.zeros_like(binary, dtype=bool)
    components = []
    for r in range(h):
        for c in range(w):
            if not binary[r, c] or seen[r, c]:
                continue
            queue = deque([(r, c)])
            seen[r, c] = True
            comp = set()
            while queue:
                cr, cc = queue.popleft()
                comp.add((cr, cc))
                for dr, dc in offsets:
                    nr, nc = cr + dr, cc + dc
                    if 0 <= nr < h and 0 <= nc < w and binary[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
            components.append(comp)
    return components


def export_prompts(request: RefinerRequest, path: str | Path) -> None:
    """Write the prompt JSON consumed by external refiners."""
    payload = {
        "image": request.image,
        "height": request.height,
        "width": request.width,
        "labels": [
            {"label": int(ps.label), "points": [[int(r), int(c)] for r, c in ps.points]}
            for ps in request.prompts
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def import_prompts(path: str | Path) -> RefinerRequest:
    """Read a prompt JSON back into a request (round-trip of export_prompts)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed prompt file: {exc}") from exc
    try:
        prompts = tuple(
            PromptSet(int(entry["label"]), np.asarray(entry["points"], dtype=np.int64).reshape(-1, 2))
            for entry in payload["labels"]
        )
        return RefinerRequest(payload["image"], int(payload["height"]), int(payload["width"]), prompts)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed prompt file: {exc}") from exc


def import_refined_mask(
    path: str | Path, expected_shape: tuple[int, int] | None = None
) -> LabelMask:
    """Read a refined PXM1 mask back, optionally checking target dimensions."""
    mask = read_label_mask(path)
    if expected_shape is not None and (mask.height, mask.width) != tuple(expected_shape):
        raise DataError(
            f"{path}: refined mask is {mask.height}x{mask.width}, target expects "
            f"{expected_shape[0]}x{expected_shape[1]}"
        )
    return mask
