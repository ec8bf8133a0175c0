import json

import pytest

from Objects import scenarios
from Objects.distributions import Instance, make_distribution


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs a larger generated instance set")


@pytest.fixture
def sec41_instance() -> Instance:
    """A sure 1 followed by a fair coin between 3 and 0, lambda 2."""
    return scenarios.sec41(2.0)


@pytest.fixture
def sec41_reference2() -> Instance:
    return scenarios.sec41(2.0, initial_reference=2.0)


@pytest.fixture
def example1_instance() -> Instance:
    return scenarios.example1(1.0, 0.1)


@pytest.fixture
def three_coins() -> Instance:
    coin = make_distribution([(1.0, 0.5), (0.0, 0.5)])
    return Instance(candidates=(coin, coin, coin), lam=1.0)


@pytest.fixture
def mixed_instance() -> Instance:
    """Three distinct candidates with overlapping supports."""
    return Instance(
        candidates=(
            make_distribution([(2.0, 0.25), (0.5, 0.75)]),
            make_distribution([(1.0, 0.5), (3.0, 0.25), (0.0, 0.25)]),
            make_distribution([(1.5, 0.6), (0.25, 0.4)]),
        ),
        lam=1.0,
    )


@pytest.fixture
def two_point_instance() -> Instance:
    """A(4, 0, .5), B(2, 1, .5) with the largest low value, and C(1.8, .5, .25)."""
    return Instance(
        candidates=(
            make_distribution([(4.0, 0.5), (0.0, 0.5)]),
            make_distribution([(2.0, 0.5), (1.0, 0.5)]),
            make_distribution([(1.8, 0.25), (0.5, 0.75)]),
        ),
        lam=1.0,
    )


@pytest.fixture
def sec41_file(tmp_path):
    path = tmp_path / "sec41.json"
    path.write_text(
        json.dumps(
            {
                "lambda": 2.0,
                "initial_reference": 0.0,
                "candidates": [
                    {"support": [[1.0, 1.0]]},
                    {"support": [[3.0, 0.5], [0.0, 0.5]]},
                ],
            }
        )
    )
    return path
