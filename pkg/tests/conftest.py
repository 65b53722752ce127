import numpy as np
import pytest

from widedpp.config import ClusterConfig, SystemConfig, preset


@pytest.fixture(scope="session")
def desk():
    return preset("desk")


@pytest.fixture(scope="session")
def small_cfg():
    return SystemConfig(n_t=32, n_ttd=4, m=8, k=8, n_r=2, n_rf=2, n_s=2)


@pytest.fixture(scope="session")
def path_clusters():
    return ClusterConfig(sigma_tau=0.0, sigma_theta_t=0.0, sigma_theta_r=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
