import numpy as np
import pytest

from qallpair.dataset import Dataset, gaussian_blobs


def binomial_se(p: float, n: int) -> float:
    return float(np.sqrt(p * (1 - p) / n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def blobs():
    """Seeded 3-class blob benchmark: (train, test)."""
    return gaussian_blobs(50, seed=11), gaussian_blobs(20, seed=12)


@pytest.fixture(scope="session")
def toy3():
    X = np.array([[2.0, 0.1], [1.8, -0.2], [-1.0, 1.7], [-0.8, 1.9], [-1.1, -1.6], [-0.9, -1.8]])
    return Dataset(X, np.array([1, 1, 2, 2, 3, 3]), 3)
