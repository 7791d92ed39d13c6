import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from strang_lab.mesh import build_cartesian, perturb  # noqa: E402


@pytest.fixture(scope="session")
def unit_square():
    return build_cartesian(1, 1)


@pytest.fixture(scope="session")
def cart8():
    return build_cartesian(8, 8)


@pytest.fixture(scope="session")
def cart8_layered():
    return build_cartesian(8, 8, n_subdomains_x=2)


@pytest.fixture(scope="session")
def distorted8():
    return perturb(build_cartesian(8, 8), 0.2, seed=3)


@pytest.fixture(autouse=True)
def _quiet_below_threshold():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="eta = .* below the coercivity threshold")
        yield


def rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
