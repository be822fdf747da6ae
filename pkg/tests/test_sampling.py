"""Training-set samplers: balance, determinism, and the negative-offset law."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixadapt import (
    DataError,
    FeatureMap,
    LabelMask,
    foreground_pixels,
    sample_classification_set,
    sample_contrastive_pairs,
    select_reference_pixels,
)


def grid_with_labels(h=10, w=12, seed=0, label_count=2):
    rng = np.random.default_rng(seed)
    feats = FeatureMap(rng.standard_normal((h, w, 6)).astype(np.float32))
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[1:4, 2:5] = 1
    if label_count >= 2:
        labels[6:9, 7:11] = 2
    return feats, LabelMask(labels, label_count)


def chebyshev_to_roi(mask: LabelMask, label: int, point) -> int:
    """Brute-force Chebyshev distance, the oracle for the sampler's
    transform-based admissibility test."""
    roi = np.argwhere(mask.labels == label)
    return int(np.max(np.abs(roi - np.asarray(point)), axis=1).min())


class TestForegroundPixels:
    def test_row_major_order(self):
        _, mask = grid_with_labels()
        coords = foreground_pixels(mask, 1)
        flat = coords[:, 0] * mask.width + coords[:, 1]
        assert np.all(np.diff(flat) > 0)
        assert len(coords) == 9

    def test_label_out_of_range(self):
        _, mask = grid_with_labels()
        with pytest.raises(DataError):
            foreground_pixels(mask, 3)
        with pytest.raises(DataError):
            foreground_pixels(mask, 0)


class TestClassificationSet:
    def test_single_label_balance(self):
        feats, mask = grid_with_labels(label_count=1)
        out = sample_classification_set(feats, mask, seed=3)
        assert (out.classes == 0).sum() == (out.classes == 1).sum() == 9
        assert out.class_count == 2

    def test_multi_label_background_matches_largest(self):
        feats, mask = grid_with_labels()
        out = sample_classification_set(feats, mask, seed=3)
        assert (out.classes == 1).sum() == 9
        assert (out.classes == 2).sum() == 12
        assert (out.classes == 0).sum() == 12

    def test_includes_every_foreground_pixel(self):
        feats, mask = grid_with_labels()
        out = sample_classification_set(feats, mask, seed=0)
        got = {tuple(c) for c in out.coords[out.classes == 1]}
        assert got == {tuple(c) for c in foreground_pixels(mask, 1)}

    def test_features_align_with_coords(self):
        feats, mask = grid_with_labels()
        out = sample_classification_set(feats, mask, seed=1)
        for c, f in zip(out.coords[:5], out.features[:5]):
            np.testing.assert_array_equal(f, feats.data[c[0], c[1]])

    def test_classes_match_mask(self):
        feats, mask = grid_with_labels()
        out = sample_classification_set(feats, mask, seed=5)
        np.testing.assert_array_equal(out.classes, mask.labels[out.coords[:, 0], out.coords[:, 1]])

    def test_seed_determinism(self):
        feats, mask = grid_with_labels()
        a = sample_classification_set(feats, mask, seed=7)
        b = sample_classification_set(feats, mask, seed=7)
        c = sample_classification_set(feats, mask, seed=8)
        np.testing.assert_array_equal(a.coords, b.coords)
        assert not np.array_equal(a.coords, c.coords)

    def test_background_sampled_without_replacement(self):
        feats, mask = grid_with_labels()
        out = sample_classification_set(feats, mask, seed=2)
        bg = out.coords[out.classes == 0]
        assert len({tuple(c) for c in bg}) == len(bg)

    def test_empty_label_rejected(self):
        feats, _ = grid_with_labels()
        mask = LabelMask(np.zeros((10, 12), dtype=np.uint8), 1)
        with pytest.raises(DataError):
            sample_classification_set(feats, mask, seed=0)

    def test_too_small_background_pool_rejected(self):
        labels = np.ones((4, 4), dtype=np.uint8)
        labels[0, 0] = 0
        feats = FeatureMap(np.zeros((4, 4, 2), dtype=np.float32))
        with pytest.raises(DataError):
            sample_classification_set(feats, LabelMask(labels, 1), seed=0)


class TestContrastivePairs:
    def test_pair_counts_and_classes(self):
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, pairs_per_label=25, seed=1)
        assert len(pairs.pair_classes) == 2 * 25 * 2
        assert pairs.pair_class_count == 3
        counts = np.bincount(pairs.pair_classes, minlength=3)
        assert counts[0] == 50 and counts[1] == 25 and counts[2] == 25

    def test_positive_pairs_share_label_and_differ(self):
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, pairs_per_label=40, seed=2)
        for label in (1, 2):
            sel = pairs.pair_classes == label
            for a, b in zip(pairs.coords_a[sel], pairs.coords_b[sel]):
                assert mask.labels[a[0], a[1]] == label
                assert mask.labels[b[0], b[1]] == label
                assert tuple(a) != tuple(b)

    def test_negative_pairs_anchor_in_roi_partner_outside(self):
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, pairs_per_label=40, seed=2)
        # negatives are emitted per label, in label order, after that label's positives
        neg = pairs.pair_classes == 0
        anchor_labels = mask.labels[pairs.coords_a[neg][:, 0], pairs.coords_a[neg][:, 1]]
        partner_labels = mask.labels[pairs.coords_b[neg][:, 0], pairs.coords_b[neg][:, 1]]
        assert set(np.unique(anchor_labels)) <= {1, 2}
        assert np.all(partner_labels != anchor_labels)

    @pytest.mark.parametrize("offset", [0, 2, 3])
    def test_negative_offset_law(self, offset):
        """Every negative partner sits at brute-force Chebyshev distance
        >= offset from its anchor's RoI."""
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, 30, min_negative_offset=offset, seed=4)
        neg = np.nonzero(pairs.pair_classes == 0)[0]
        for i in neg:
            anchor_label = int(mask.labels[pairs.coords_a[i][0], pairs.coords_a[i][1]])
            d = chebyshev_to_roi(mask, anchor_label, pairs.coords_b[i])
            assert d >= offset

    def test_unreachable_offset_rejected(self):
        feats, mask = grid_with_labels(h=6, w=6, label_count=1)
        with pytest.raises(DataError):
            sample_contrastive_pairs(feats, mask, 10, min_negative_offset=50, seed=0)

    def test_single_pixel_label_rejected(self):
        labels = np.zeros((5, 5), dtype=np.uint8)
        labels[2, 2] = 1
        feats = FeatureMap(np.zeros((5, 5, 2), dtype=np.float32))
        with pytest.raises(DataError):
            sample_contrastive_pairs(feats, LabelMask(labels, 1), 10, seed=0)

    def test_seed_determinism(self):
        feats, mask = grid_with_labels()
        a = sample_contrastive_pairs(feats, mask, 20, seed=9)
        b = sample_contrastive_pairs(feats, mask, 20, seed=9)
        np.testing.assert_array_equal(a.coords_a, b.coords_a)
        np.testing.assert_array_equal(a.coords_b, b.coords_b)

    def test_features_align_with_coords(self):
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, 15, seed=3)
        for i in range(0, len(pairs.pair_classes), 7):
            np.testing.assert_array_equal(
                pairs.features_a[i], feats.data[pairs.coords_a[i][0], pairs.coords_a[i][1]]
            )
            np.testing.assert_array_equal(
                pairs.features_b[i], feats.data[pairs.coords_b[i][0], pairs.coords_b[i][1]]
            )

    @given(offset=st.integers(0, 4), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_offset_law_holds_for_any_seed(self, offset, seed):
        feats, mask = grid_with_labels()
        pairs = sample_contrastive_pairs(feats, mask, 12, min_negative_offset=offset, seed=seed)
        neg = np.nonzero(pairs.pair_classes == 0)[0]
        for i in neg[::3]:
            anchor_label = int(mask.labels[pairs.coords_a[i][0], pairs.coords_a[i][1]])
            assert chebyshev_to_roi(mask, anchor_label, pairs.coords_b[i]) >= offset


class TestReferenceSelection:
    def test_k_capped_at_roi_size(self):
        feats, mask = grid_with_labels()
        refs = select_reference_pixels(feats, mask, 1, k=100, seed=0)
        assert refs.k == 9

    def test_distinct_in_roi_points(self):
        feats, mask = grid_with_labels()
        refs = select_reference_pixels(feats, mask, 2, k=5, seed=1)
        assert refs.k == 5
        assert len({tuple(c) for c in refs.coordinates}) == 5
        for r, c in refs.coordinates:
            assert mask.labels[r, c] == 2

    def test_seed_determinism(self):
        feats, mask = grid_with_labels()
        a = select_reference_pixels(feats, mask, 2, k=6, seed=4)
        b = select_reference_pixels(feats, mask, 2, k=6, seed=4)
        np.testing.assert_array_equal(a.coordinates, b.coordinates)

    def test_empty_label_rejected(self):
        feats, _ = grid_with_labels()
        empty = LabelMask(np.zeros((10, 12), dtype=np.uint8), 1)
        with pytest.raises(DataError):
            select_reference_pixels(feats, empty, 1, k=3, seed=0)

    def test_shape_mismatch_rejected(self):
        feats, _ = grid_with_labels(h=10, w=12)
        _, mask = grid_with_labels(h=8, w=12)
        with pytest.raises(DataError):
            select_reference_pixels(feats, mask, 1, k=3, seed=0)
