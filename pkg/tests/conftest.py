"""
Shared fixtures: the two-function toy problem, the similarity pair and a
seeded random instance.

Tests marked ``slow`` run the Monte-Carlo checks at full ensemble size and
are skipped unless pytest is given ``--run-slow``.
"""

import pytest

from sppm_benchmark.core.numerics import rng_new
from sppm_benchmark.core.problem import (
    constants, create_random_problem, similarity_pair_problem, toy_problem
)


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the full-size Monte-Carlo tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size Monte-Carlo test, needs --run-slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def toy():
    return toy_problem()


@pytest.fixture
def toy_consts(toy):
    return constants(toy)


@pytest.fixture
def similarity():
    return similarity_pair_problem()


@pytest.fixture
def similarity_consts(similarity):
    return constants(similarity)


@pytest.fixture
def random_problem():
    return create_random_problem(8, 3, seed=7, name="random-8x3")


@pytest.fixture
def random_consts(random_problem):
    return constants(random_problem)


@pytest.fixture
def rng():
    return rng_new(123, 0)
