import numpy as np
import pytest

from wmblow import verify


@pytest.fixture(scope="session")
def gs7():
    return verify.ground_state(7)


@pytest.fixture(scope="session")
def ctx7():
    return verify.context(7)


@pytest.fixture(scope="session")
def ctx8():
    return verify.context(8)


@pytest.fixture(scope="session")
def ps7():
    return verify.profile_set(7, 3, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
