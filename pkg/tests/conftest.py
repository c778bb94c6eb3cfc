import numpy as np
import pytest

from rpisynth import io


@pytest.fixture(scope="session")
def ex1():
    return io.load_fixture("example1_lti.json")[0]


@pytest.fixture(scope="session")
def ex1_options():
    return io.load_fixture("example1_lti.json")[1]


@pytest.fixture(scope="session")
def ex1_lpv():
    return io.load_fixture("example1_lpv.json")[0]


@pytest.fixture(scope="session")
def ex2():
    return io.load_fixture("example2.json")[0]


@pytest.fixture(scope="session")
def ex2_solution():
    return io.load_fixture("example2_solution.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
