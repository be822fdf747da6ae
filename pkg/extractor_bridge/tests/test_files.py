"""Byte layout, round trips, and interpolation-convention agreement.

The localization toolkit (`pixadapt`) is imported here only to verify
that files written by this package pass the other side's validators —
the bridge's own code never touches it.
"""

import struct

import numpy as np
import pytest
import pixadapt

from extractor_bridge import files
from extractor_bridge.errors import InputError


class TestFeatureMapBytes:
    def test_exact_layout(self, tmp_path):
        data = np.arange(12, dtype=np.float32).reshape(2, 3, 2)
        path = files.write_feature_map(data, tmp_path / "m.pxf")
        blob = path.read_bytes()
        assert blob[:4] == b"PXF1"
        assert struct.unpack("<3I", blob[4:16]) == (2, 3, 2)
        assert blob[16:] == data.astype("<f4").tobytes()

    def test_round_trip(self, tmp_path, rng):
        data = rng.normal(size=(5, 4, 3)).astype(np.float32)
        path = files.write_feature_map(data, tmp_path / "m.pxf")
        np.testing.assert_array_equal(files.read_feature_map(path), data)

    def test_primary_reader_accepts_bridge_file(self, tmp_path, rng):
        data = rng.normal(size=(6, 7, 4)).astype(np.float32)
        path = files.write_feature_map(data, tmp_path / "m.pxf")
        fmap = pixadapt.read_feature_map(path)
        np.testing.assert_array_equal(fmap.data, data)

    def test_bridge_reader_accepts_primary_file(self, tmp_path, rng):
        data = rng.normal(size=(3, 5, 2)).astype(np.float32)
        pixadapt.write_feature_map(pixadapt.FeatureMap(data), tmp_path / "m.pxf")
        np.testing.assert_array_equal(files.read_feature_map(tmp_path / "m.pxf"), data)

    @pytest.mark.parametrize("mangle", [
        lambda b: b[:-1],                      # truncated payload
        lambda b: b + b"\x00",                 # trailing byte
        lambda b: b"XXXX" + b[4:],             # wrong magic
        lambda b: b[:10],                      # truncated header
    ])
    def test_rejects_damage(self, tmp_path, rng, mangle):
        path = files.write_feature_map(rng.normal(size=(2, 2, 2)).astype(np.float32),
                                       tmp_path / "m.pxf")
        path.write_bytes(mangle(path.read_bytes()))
        with pytest.raises(InputError):
            files.read_feature_map(path)

    def test_rejects_non_finite(self, tmp_path):
        with pytest.raises(InputError, match="NaN"):
            files.write_feature_map(np.full((1, 1, 1), np.nan), tmp_path / "m.pxf")


class TestLabelMaskBytes:
    def test_exact_layout(self, tmp_path):
        labels = np.array([[0, 1], [2, 0]], dtype=np.uint8)
        path = files.write_label_mask(labels, 2, tmp_path / "m.pxm")
        blob = path.read_bytes()
        assert blob[:4] == b"PXM1"
        assert struct.unpack("<3I", blob[4:16]) == (2, 2, 2)
        assert blob[16:] == labels.tobytes()

    def test_cross_package_round_trip(self, tmp_path):
        labels = np.array([[0, 3], [1, 2]], dtype=np.uint8)
        path = files.write_label_mask(labels, 3, tmp_path / "m.pxm")
        mask = pixadapt.read_label_mask(path)
        np.testing.assert_array_equal(mask.labels, labels)
        assert mask.label_count == 3

        pixadapt.write_label_mask(mask, tmp_path / "back.pxm")
        got, count = files.read_label_mask(tmp_path / "back.pxm")
        np.testing.assert_array_equal(got, labels)
        assert count == 3

    def test_rejects_label_above_count(self, tmp_path):
        with pytest.raises(InputError):
            files.write_label_mask(np.array([[5]]), 2, tmp_path / "m.pxm")
        path = files.write_label_mask(np.array([[1]]), 1, tmp_path / "ok.pxm")
        blob = bytearray(path.read_bytes())
        blob[-1] = 9  # corrupt the stored label beyond the declared count
        path.write_bytes(bytes(blob))
        with pytest.raises(InputError):
            files.read_label_mask(path)


class TestUpsampleConvention:
    def test_half_pixel_example(self):
        grid = np.array([0.0, 1.0]).reshape(2, 1, 1)
        out = files.upsample_bilinear(grid, 4, 1)
        np.testing.assert_allclose(out.ravel(), [0.0, 0.25, 0.75, 1.0])

    def test_single_patch_broadcasts(self):
        grid = np.array([[[3.5, -1.0]]])
        out = files.upsample_bilinear(grid, 14, 14)
        assert out.shape == (14, 14, 2)
        np.testing.assert_array_equal(out, np.broadcast_to(grid, (14, 14, 2)))

    def test_agrees_with_primary_interpolation(self, rng):
        for _ in range(25):
            gh, gw = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            dim = int(rng.integers(1, 5))
            oh, ow = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            grid = rng.normal(size=(gh, gw, dim))
            ours = files.upsample_bilinear(grid, oh, ow)
            theirs = pixadapt.interpolate_patch_grid(
                pixadapt.PatchGrid(grid.astype(np.float32)), oh, ow
            )
            assert np.abs(ours - theirs.data).max() < 1e-5

    def test_rejects_bad_shapes(self):
        with pytest.raises(InputError):
            files.upsample_bilinear(np.zeros((2, 2)), 4, 4)
        with pytest.raises(InputError):
            files.upsample_bilinear(np.zeros((2, 2, 1)), 0, 4)
