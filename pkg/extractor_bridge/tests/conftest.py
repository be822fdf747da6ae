import matplotlib
import matplotlib.image
import numpy as np
import pytest

matplotlib.use("Agg")


def write_gray_png(path, values):
    """8-bit grayscale PNG; values are uint8."""
    matplotlib.image.imsave(path, np.asarray(values, dtype=np.uint8),
                            cmap="gray", vmin=0, vmax=255)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(99)


@pytest.fixture
def disk_image(tmp_path):
    """96x96 float .npy: intensity-1.0 disk of radius 20 on a 0.0 background
    with mild noise. Returns (path, analytic disk footprint)."""
    rng = np.random.default_rng(5)
    rows, cols = np.indices((96, 96))
    disk = (rows - 48) ** 2 + (cols - 48) ** 2 <= 20**2
    image = disk.astype(np.float64) + rng.normal(0.0, 0.03, size=(96, 96))
    path = tmp_path / "disk.npy"
    np.save(path, image)
    return path, disk
