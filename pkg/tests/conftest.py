import numpy as np
import pytest

from pegsocket.corpus import funnel_corpus, v_socket, wedge_trap
from pegsocket.design import ErrorModel


@pytest.fixture(scope="session")
def errors():
    return ErrorModel(0.05, 0.05, 0.01)


@pytest.fixture(scope="session")
def vdesign():
    return v_socket()


@pytest.fixture(scope="session")
def wedge():
    return wedge_trap()


@pytest.fixture(scope="session")
def corpus():
    return funnel_corpus(30, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
