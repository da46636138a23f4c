import sys

import numpy as np
import pytest

from layergauge import _accel
from layergauge.architecture import build_scaled_alexnet

BACKENDS = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def scaled_arch():
    return build_scaled_alexnet()


@pytest.fixture(scope="session")
def two_block_arch():
    return build_scaled_alexnet(blocks=2)


@pytest.fixture(scope="session")
def intensity_data(tmp_path_factory, two_block_arch):
    """Two-class mean-intensity dataset plus a seeded stand-in for pretrained weights.

    Edge filters are zero-mean and blind to intensity, so Gaussian filters are used here.
    """
    from layergauge import synthetic
    from layergauge.weights_io import Provenance, WeightBundle, random_bundle, save_weights

    root = tmp_path_factory.mktemp("intensity")
    manifest = synthetic.write_intensity_dataset(root / "images", per_class=10, seed=4)
    weights = root / "stand-in.otsw"
    bundle = WeightBundle(Provenance("pretrained", 0, "stand-in"), random_bundle(two_block_arch, 1).tensors)
    save_weights(bundle, weights, two_block_arch)
    return manifest, str(weights)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
