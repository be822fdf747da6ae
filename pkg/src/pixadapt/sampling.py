"""Seeded sampling of training sets and inference references.

All samplers are deterministic functions of (inputs, seed).  Coordinates
are (row, col) pairs; features are float32 rows aligned with them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .formats import FeatureMap, LabelMask


@dataclass(frozen=True)
class ClassificationSet:
    """Class-balanced pixel training set for the classification adapter."""

    coords: np.ndarray  # (N, 2) int
    features: np.ndarray  # (N, D) float32
    classes: np.ndarray  # (N,) int
    class_count: int


@dataclass(frozen=True)
class PairSet:
    """Sampled (reference, target, pair class) triples for contrastive training.

    Pair class 0 is the shared no-match class; classes 1..L mark positive
    pairs drawn from that RoI label.  Source coordinates are kept so pair
    classes can be re-validated against the mask.
    """

    features_a: np.ndarray  # (N, D) float32
    features_b: np.ndarray  # (N, D) float32
    pair_classes: np.ndarray  # (N,) int
    coords_a: np.ndarray  # (N, 2) int
    coords_b: np.ndarray  # (N, 2) int
    pair_class_count: int


@dataclass(frozen=True)
class ReferenceSet:
    """Reference pixels for one RoI label, used as templates at inference."""

    label: int
    coordinates: np.ndarray  # (k, 2) int
    features: np.ndarray  # (k, D) float32

    @property
    def k(self) -> int:
        return len(self.coordinates)


def _check_same_shape(features: FeatureMap, mask: LabelMask) -> None:
    if (features.height, features.width) != (mask.height, mask.width):
        raise DataError(
            f"feature map is {features.height}x{features.width} but mask is "
            f"{mask.height}x{mask.width}"
        )


def foreground_pixels(mask: LabelMask, label: int) -> np.ndarray:
    """Coordinates carrying `label`, in row-major order."""
    if not 1 <= label <= mask.label_count:
        raise DataError(f"label {label} out of range 1..{mask.label_count}")
    rows, cols = np.nonzero(mask.labels == label)
    return np.stack([rows, cols], axis=1).astype(np.int64)


def sample_classification_set(
    features: FeatureMap, mask: LabelMask, seed: int
) -> ClassificationSet:
    """All foreground pixels of every label plus a seeded background sample.

    The background count matches the foreground count for a single label;
    for multi-label masks it matches the largest per-label count so no
    label is dominated by the background class.
    """
    _check_same_shape(features, mask)
    if mask.label_count < 1:
        raise DataError("mask declares no foreground labels")
    per_label = [foreground_pixels(mask, lab) for lab in range(1, mask.label_count + 1)]
    for lab, coords in enumerate(per_label, start=1):
        if len(coords) == 0:
            raise DataError(f"label {lab} has no foreground pixels")

    bg_rows, bg_cols = np.nonzero(mask.labels == 0)
    bg_pool = np.stack([bg_rows, bg_cols], axis=1).astype(np.int64)
    if mask.label_count == 1:
        bg_needed = len(per_label[0])
    else:
        bg_needed = max(len(c) for c in per_label)
    if len(bg_pool) < bg_needed:
        raise DataError(
            f"background pool has {len(bg_pool)} pixels, need {bg_needed} for balance"
        )

    rng = np.random.default_rng(seed)
    picked = rng.choice(len(bg_pool), size=bg_needed, replace=False)
    bg_coords = bg_pool[np.sort(picked)]

    coords = np.concatenate([bg_coords] + per_label, axis=0)
    classes = np.concatenate(
        [np.zeros(bg_needed, dtype=np.int64)]
        + [np.full(len(c), lab, dtype=np.int64) for lab, c in enumerate(per_label, start=1)]
    )
    feats = features.data[coords[:, 0], coords[:, 1]]
    return ClassificationSet(coords, feats, classes, mask.label_count + 1)


def _chebyshev_to_label(mask: LabelMask, label: int) -> np.ndarray:
    """Per-pixel Chebyshev distance to the nearest pixel of `label`."""
    outside = (mask.labels != label).astype(np.uint8)
    return ndimage.distance_transform_cdt(outside, metric="chessboard")


def sample_contrastive_pairs(
    features: FeatureMap,
    mask: LabelMask,
    pairs_per_label: int,
    min_negative_offset: int = 0,
    seed: int = 0,
) -> PairSet:
    """Positive and negative pixel pairs per RoI label.

    Positives pair two distinct pixels of the same label (sampled with
    replacement across pairs); negatives anchor one pixel in the label and
    one outside it, at least `min_negative_offset` Chebyshev pixels from
    the RoI.  Negative pairs carry the shared no-match class 0.
    """
    _check_same_shape(features, mask)
    if pairs_per_label < 1:
        raise DataError(f"pairs_per_label must be >= 1, got {pairs_per_label}")
    if min_negative_offset < 0:
        raise DataError(f"min_negative_offset must be >= 0, got {min_negative_offset}")
    if mask.label_count < 1:
        raise DataError("mask declares no foreground labels")

    rng = np.random.default_rng(seed)
    all_a: list[np.ndarray] = []
    all_b: list[np.ndarray] = []
    all_cls: list[np.ndarray] = []
    for label in range(1, mask.label_count + 1):
        roi = foreground_pixels(mask, label)
        if len(roi) < 2:
            raise DataError(f"label {label} has {len(roi)} pixels, need >= 2 for pairs")
        dist = _chebyshev_to_label(mask, label)
        adm_rows, adm_cols = np.nonzero((mask.labels != label) & (dist >= min_negative_offset))
        admissible = np.stack([adm_rows, adm_cols], axis=1).astype(np.int64)
        if len(admissible) == 0:
            raise DataError(
                f"no admissible negative partner for label {label} at "
                f"Chebyshev offset >= {min_negative_offset}"
            )
        # Two distinct uniform indices per pair, with replacement across pairs.
        first = rng.integers(0, len(roi), size=pairs_per_label)
        second = rng.integers(0, len(roi) - 1, size=pairs_per_label)
        second = second + (second >= first)
        all_a.append(roi[first])
        all_b.append(roi[second])
        all_cls.append(np.full(pairs_per_label, label, dtype=np.int64))

        anchors = roi[rng.integers(0, len(roi), size=pairs_per_label)]
        partners = admissible[rng.integers(0, len(admissible), size=pairs_per_label)]
        all_a.append(anchors)
        all_b.append(partners)
        all_cls.append(np.zeros(pairs_per_label, dtype=np.int64))

    coords_a = np.concatenate(all_a, axis=0)
    coords_b = np.concatenate(all_b, axis=0)
    pair_classes = np.concatenate(all_cls)
    feats_a = features.data[coords_a[:, 0], coords_a[:, 1]]
    feats_b = features.data[coords_b[:, 0], coords_b[:, 1]]
    return PairSet(feats_a, feats_b, pair_classes, coords_a, coords_b, mask.label_count + 1)


def select_reference_pixels(
    features: FeatureMap, mask: LabelMask, label: int, k: int, seed: int = 0
) -> ReferenceSet:
    """min(k, RoI size) distinct in-RoI pixels, uniform without replacement."""
    _check_same_shape(features, mask)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    roi = foreground_pixels(mask, label)
    if len(roi) == 0:
        raise DataError(f"label {label} has no pixels to reference")
    rng = np.random.default_rng(seed)
    take = min(k, len(roi))
    picked = rng.choice(len(roi), size=take, replace=False)
    coords = roi[np.sort(picked)]
    return ReferenceSet(label, coords, features.data[coords[:, 0], coords[:, 1]])
