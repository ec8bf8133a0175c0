"""Helper module for walking the joint realizations of independent candidates."""

import math
from collections.abc import Iterable
from typing import Dict, Sequence, Tuple

from Objects.distributions import DiscreteDistribution, make_distribution


def flatten_realizations(
    candidates: Sequence[DiscreteDistribution],
    prefix: Tuple[float, ...] = (),
    probability: float = 1.0,
) -> Iterable[Tuple[Tuple[float, ...], float]]:
    """Take a candidate sequence and flatten it to its joint outcomes.

    Args:
        candidates: The candidates still to be realized, in arrival order.
        prefix: Values already realized by earlier candidates.
        probability: Probability of ``prefix``.

    Yields:
        Tuple[Tuple[float, ...], float]: A full realization and its probability.
    """
    if not candidates:
        yield prefix, probability
        return

    head, tail = candidates[0], candidates[1:]
    for value, p in head.atoms:
        # Recursively yield the realizations that extend this atom
        yield from flatten_realizations(tail, prefix + (value,), probability * p)


def realization_count(candidates: Sequence[DiscreteDistribution]) -> int:
    return math.prod(c.support_size for c in candidates)


def enumerate_max_distribution(
    candidates: Sequence[DiscreteDistribution],
) -> DiscreteDistribution:
    """Distribution of the maximum by summing over every joint realization."""
    masses: Dict[float, float] = {}
    for values, probability in flatten_realizations(candidates):
        best = max(values)
        masses[best] = masses.get(best, 0.0) + probability
    return make_distribution(masses.items())
