import numpy as np
import pytest

from pixadapt import (
    FeatureMap,
    LabelMask,
    confound_scenario,
    materialize_scenario,
    separable_scenario,
)
from pixadapt.config import RunConfig


@pytest.fixture(scope="session")
def separable_dir(tmp_path_factory):
    """Materialized three-label scenario with orthogonal clusters."""
    out = tmp_path_factory.mktemp("scenarios") / "separable"
    materialize_scenario(separable_scenario(seed=7), out)
    return out


@pytest.fixture(scope="session")
def confound_dir(tmp_path_factory):
    """Materialized scenario with a near-foreground background cluster."""
    out = tmp_path_factory.mktemp("scenarios") / "confound"
    spec, params = confound_scenario(seed=11)
    materialize_scenario(spec, out, params)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_features(rng):
    return FeatureMap(rng.standard_normal((6, 5, 4)).astype(np.float32))


@pytest.fixture
def small_mask():
    labels = np.zeros((6, 5), dtype=np.uint8)
    labels[1:3, 1:4] = 1
    labels[4:6, 0:2] = 2
    return LabelMask(labels, 2)


def quick_config(**overrides) -> RunConfig:
    """Training settings sized for unit tests rather than accuracy."""
    base = dict(epochs=15, pairs_per_label=80, batch_size=64)
    base.update(overrides)
    return RunConfig(**base)
