"""A classical promptable segmenter driven by exported prompt files.

Stands in for a learned point-promptable model: given seed points inside
a region of interest, it grows each seed over the intensity image and
unions the results. Deterministic, so refined masks are reproducible.
"""

import json
from pathlib import Path

import numpy as np
import scipy.ndimage

from . import files, images
from .errors import PromptError

_EIGHT = np.ones((3, 3), dtype=int)


def grow_region(image: np.ndarray, seed: tuple[int, int], tolerance: float) -> np.ndarray:
    """8-connected region containing `seed` where intensity stays within
    `tolerance` of the seed's value."""
    candidates = np.abs(image - image[seed]) <= tolerance
    labeled, _ = scipy.ndimage.label(candidates, structure=_EIGHT)
    return labeled == labeled[seed]


def pick_tolerance(image: np.ndarray, scale: float = 0.3) -> float:
    """Tolerance as a fraction of the robust intensity range (p5..p95).

    On a high-contrast object over a flat background this keeps growth
    inside the object; on a constant image it degrades to exact-value
    growth, which is still correct.
    """
    p5, p95 = np.percentile(image, [5.0, 95.0])
    return float(scale * (p95 - p5))


def read_prompts(path: str | Path) -> tuple[int, int, list[tuple[int, list[tuple[int, int]]]]]:
    """Parse and validate a prompt file.

    Returns (height, width, [(label, points), ...]). Raises PromptError
    for anything malformed: bad JSON, missing keys, empty prompt lists,
    duplicate labels, or out-of-bounds points.
    """
    path = Path(path)
    if not path.exists():
        raise PromptError(f"no such prompt file: {path}")
    try:
        payload = json.loads(path.read_text())
        height, width = int(payload["height"]), int(payload["width"])
        entries = [
            (int(entry["label"]), [(int(r), int(c)) for r, c in entry["points"]])
            for entry in payload["labels"]
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PromptError(f"{path}: malformed prompt file: {exc}") from exc

    if height < 1 or width < 1:
        raise PromptError(f"{path}: bad dimensions {height}x{width}")
    if not entries:
        raise PromptError(f"{path}: prompt file lists no labels")
    labels = [label for label, _ in entries]
    if len(set(labels)) != len(labels) or min(labels) < 1:
        raise PromptError(f"{path}: labels must be distinct and >= 1, got {labels}")
    for label, points in entries:
        if not points:
            raise PromptError(f"{path}: label {label} has an empty point list")
        for r, c in points:
            if not (0 <= r < height and 0 <= c < width):
                raise PromptError(f"{path}: point ({r}, {c}) outside {height}x{width}")
    return height, width, entries


def refine_with_segmenter(
    prompt_file: str | Path,
    image_path: str | Path,
    out_path: str | Path,
    tolerance: float | None = None,
) -> Path:
    """Segment every prompted label on the image and write a PXM1 mask.

    Labels are painted in ascending order and earlier labels keep
    contested pixels. `tolerance` defaults to `pick_tolerance(image)`.
    """
    height, width, entries = read_prompts(prompt_file)
    image = images.load_image(image_path)
    if image.shape != (height, width):
        raise PromptError(
            f"image {image_path} is {image.shape}, prompt file says {height}x{width}"
        )
    if tolerance is None:
        tolerance = pick_tolerance(image)

    out = np.zeros((height, width), dtype=np.uint8)
    for label, points in sorted(entries):
        region = np.zeros((height, width), dtype=bool)
        for point in points:
            region |= grow_region(image, point, tolerance)
        out[region & (out == 0)] = label
    return files.write_label_mask(out, max(label for label, _ in entries), out_path)
