import math

import pytest

from Objects.distributions import (
    Instance,
    make_distribution,
    max_distribution,
    point_mass,
)
from realizations import (
    enumerate_max_distribution,
    flatten_realizations,
    realization_count,
)


@pytest.fixture
def candidates():
    return (
        make_distribution([(1.0, 0.5), (0.0, 0.5)]),
        point_mass(0.5),
        make_distribution([(2.0, 0.25), (0.25, 0.75)]),
    )


def test_flatten_realizations(candidates):
    outcomes = list(flatten_realizations(candidates))
    assert len(outcomes) == realization_count(candidates) == 4
    assert outcomes[0] == ((0.0, 0.5, 0.25), 0.375)
    assert math.fsum(p for _, p in outcomes) == pytest.approx(1.0)


def test_flatten_realizations_of_nothing():
    assert list(flatten_realizations(())) == [((), 1.0)]


def test_enumerated_maximum_matches_product_of_cdfs(candidates, mixed_instance):
    for sequence in (candidates, mixed_instance.candidates):
        enumerated = enumerate_max_distribution(sequence)
        closed = max_distribution(Instance(candidates=sequence))
        assert enumerated.values == closed.values
        assert enumerated.probabilities == pytest.approx(closed.probabilities)
