import numpy as np
import pytest

from nlphase import kernels as K
from nlphase import potentials as P


@pytest.fixture(scope="session")
def quartic():
    return P.quartic(1.0)


@pytest.fixture(scope="session")
def band1():
    return K.band(1.0, 2.0, 1.0, dim=1)


@pytest.fixture(scope="session")
def band2():
    return K.band(1.0, 2.0, 1.0, dim=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
