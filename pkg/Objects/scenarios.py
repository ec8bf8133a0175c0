"""Builders for the worked instances of loss-averse stopping and their closed forms."""
from typing import Tuple

from Objects.distributions import (
    Instance,
    TwoPointDistribution,
    expectation,
    make_distribution,
    point_mass,
)
from Objects.errors import ParamOutOfRange

IID_N_MAX = 5


def _check_epsilon(epsilon: float, upper: float = 1.0) -> None:
    if not 0.0 < epsilon < upper:
        raise ParamOutOfRange(f"epsilon must lie in (0, {upper}), got {epsilon}.")


def _check_lambda(lam: float) -> None:
    if lam < 0:
        raise ParamOutOfRange(f"lambda must be nonnegative, got {lam}.")


def example1(lam: float, epsilon: float) -> Instance:
    """Two candidates on which the biased agent is exactly indifferent at the first.

    The first candidate is deterministic at 1 / (1 + (1 - epsilon) * lam); the second
    is 1 / epsilon with probability epsilon and 0 otherwise.
    """
    _check_lambda(lam)
    _check_epsilon(epsilon)
    first = point_mass(1.0 / (1.0 + (1.0 - epsilon) * lam))
    second = make_distribution([(1.0 / epsilon, epsilon), (0.0, 1.0 - epsilon)])
    return Instance(candidates=(first, second), lam=lam)


def example1_closed_forms(lam: float, epsilon: float) -> Tuple[float, float]:
    """Prophet ratio and unbiased ratio of :func:`example1`."""
    return lam + 2.0 - epsilon * (lam + 1.0), lam + 1.0 - epsilon * lam


def sec41(lam: float, initial_reference: float = 0.0) -> Instance:
    """A sure 1 followed by a fair coin between 3 and 0."""
    _check_lambda(lam)
    return Instance(
        candidates=(point_mass(1.0), make_distribution([(3.0, 0.5), (0.0, 0.5)])),
        lam=lam,
        initial_reference=initial_reference,
    )


def iid_n(n: int) -> Instance:
    """n identical 3-point candidates with lambda = n ** (n + 2).

    Each candidate is 0 w.p. 1/n, 1/n^3 w.p. 1 - 1/n^2 - 1/n and 1 w.p. 1/n^2.
    """
    if not 2 <= n <= IID_N_MAX:
        raise ParamOutOfRange(f"n must lie in [2, {IID_N_MAX}], got {n}.")
    candidate = make_distribution(
        [
            (0.0, 1.0 / n),
            (1.0 / n**3, 1.0 - 1.0 / n**2 - 1.0 / n),
            (1.0, 1.0 / n**2),
        ]
    )
    return Instance(candidates=(candidate,) * n, lam=float(n ** (n + 2)))


def iid_n_closed_form(n: int) -> float:
    """Value selected by the agent that takes the first nonzero candidate."""
    single = expectation(iid_n(n).candidates[0])
    return single * (1.0 - n ** (-n)) / (1.0 - 1.0 / n)


def two_point_tight_candidates(
    epsilon: float,
) -> Tuple[TwoPointDistribution, TwoPointDistribution]:
    _check_epsilon(epsilon, upper=0.5)
    return (
        TwoPointDistribution(high=1.0, low=epsilon**2, p_high=epsilon),
        TwoPointDistribution(
            high=epsilon + epsilon**2 * (1.0 - epsilon),
            low=0.0,
            p_high=1.0 - epsilon**2,
        ),
    )


def two_point_tight(epsilon: float) -> Instance:
    """Two 2-point candidates whose best ordering approaches half the prophet.

    The agent's loss aversion is epsilon ** -4 + 1.
    """
    first, second = two_point_tight_candidates(epsilon)
    return Instance(
        candidates=(first.to_distribution(), second.to_distribution()),
        lam=epsilon**-4 + 1.0,
    )


def two_point_tight_value(epsilon: float) -> float:
    """Value selected in either order, equal to the mean of the first candidate."""
    return epsilon + epsilon**2 * (1.0 - epsilon)
