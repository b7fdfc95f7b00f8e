import pytest

from pcsilab.cli import fixture_scenario, load_fixture
from pcsilab.model import ProblemInstance


@pytest.fixture(scope="session")
def example1():
    return load_fixture(1)


@pytest.fixture(scope="session")
def example2():
    return load_fixture(2)


@pytest.fixture(scope="session")
def example3():
    return load_fixture(3)


@pytest.fixture(scope="session")
def example4():
    return load_fixture(4)


def fixture_setup(fx, seed=0):
    return ProblemInstance(**fx["instance"]), fixture_scenario(fx, seed)
