import numpy as np
import pytest

from actloss import ActivationProfile, generate


@pytest.fixture(scope="session")
def small_ensemble():
    """n=8, m=64 Gaussian instance shared by derivative tests."""
    return generate(8, 64, seed=11)


@pytest.fixture(scope="session")
def h1_profile():
    return ActivationProfile("h1", 10.0, 20.0)


@pytest.fixture(scope="session")
def h2_profile():
    return ActivationProfile("h2", 10.0, 20.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
