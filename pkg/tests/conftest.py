import numpy as np
import pytest

from edwsvr.data import Dataset
from edwsvr.kernels import KernelSpec


def random_instance(rng, n, d, kind="rbf", noise=0.2):
    """Small regression problem with targets scaled to [0, 1]."""
    X = rng.uniform(size=(n, d))
    y = X @ rng.normal(size=d) + noise * rng.normal(size=n)
    y = (y - y.min()) / (y.max() - y.min())
    spec = KernelSpec("linear") if kind == "linear" else KernelSpec.rbf(1.0 / d)
    return Dataset(X, y), spec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
