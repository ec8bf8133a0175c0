"""Finite discrete distributions, candidate sequences and the prophet's maximum.

Values are stored as doubles and compared exactly; tolerances are confined to
probability arithmetic (1e-12 internally, 1e-9 when ingesting user input).
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from Objects.errors import (
    EmptySupport,
    InvalidLambda,
    NegativeProbability,
    NegativeValue,
    NotTwoPoint,
    ProbabilitySumOutOfTolerance,
)

PROBABILITY_TOLERANCE = 1e-12
INGESTION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DiscreteDistribution:
    """A finite-support distribution over nonnegative values.

    Atoms are canonical: values strictly increasing, every probability positive,
    probabilities summing to one within ``PROBABILITY_TOLERANCE``. Build instances
    with :func:`make_distribution` unless the atoms are already canonical.
    """

    values: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probabilities = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probabilities)

        if not values:
            raise EmptySupport("A distribution needs at least one atom.")
        if len(values) != len(probabilities):
            raise ValueError("values and probabilities must have the same length")
        if any(v < 0 or math.isnan(v) for v in values):
            raise NegativeValue(f"Values must be nonnegative, got {values}.")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"Values must be strictly increasing, got {values}.")
        if any(p <= 0 for p in probabilities):
            raise NegativeProbability(
                f"Atom probabilities must be positive, got {probabilities}."
            )
        total = math.fsum(probabilities)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ProbabilitySumOutOfTolerance(
                f"Probabilities sum to {total!r}, expected 1."
            )

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.values, self.probabilities))

    @property
    def support_size(self) -> int:
        return len(self.values)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return the support and the probabilities as float arrays."""
        return np.asarray(self.values, dtype=float), np.asarray(
            self.probabilities, dtype=float
        )

    def cdf(self, threshold: float) -> float:
        """Pr(X <= threshold)."""
        return math.fsum(p for v, p in self.atoms if v <= threshold)

    def probability_of(self, value: float) -> float:
        return math.fsum(p for v, p in self.atoms if v == value)

    def to_json_dict(self) -> Dict[str, list]:
        return {"support": [[v, p] for v, p in self.atoms]}


@dataclass(frozen=True)
class TwoPointDistribution:
    """A candidate equal to ``high`` with probability ``p_high``, else ``low``."""

    high: float
    low: float
    p_high: float

    def __post_init__(self):
        if self.low < 0:
            raise NegativeValue(f"Low value must be nonnegative, got {self.low}.")
        if self.low > self.high:
            raise NotTwoPoint(
                f"Low value {self.low} exceeds high value {self.high}."
            )
        if not 0.0 <= self.p_high <= 1.0:
            raise NegativeProbability(
                f"p_high must lie in [0, 1], got {self.p_high}."
            )

    def to_distribution(self) -> DiscreteDistribution:
        return make_distribution(
            [(self.high, self.p_high), (self.low, 1.0 - self.p_high)]
        )

    @property
    def expectation(self) -> float:
        return self.p_high * self.high + (1.0 - self.p_high) * self.low


@dataclass(frozen=True)
class Instance:
    """An ordered sequence of independent candidates faced by a lambda-biased agent.

    ``lam`` is the loss-aversion multiplier and ``initial_reference`` the reference
    value before the first candidate arrives.
    """

    candidates: Tuple[DiscreteDistribution, ...]
    lam: float = 0.0
    initial_reference: float = 0.0
    _grid: Tuple[float, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        candidates = tuple(self.candidates)
        object.__setattr__(self, "candidates", candidates)
        if not candidates:
            raise EmptySupport("An instance needs at least one candidate.")
        if math.isnan(self.lam) or self.lam < 0:
            # Negative loss aversion would prefer losses; it is excluded from the model.
            raise InvalidLambda(f"lambda must be nonnegative, got {self.lam}.")
        if math.isnan(self.initial_reference) or self.initial_reference < 0:
            raise NegativeValue(
                f"initial_reference must be nonnegative, got {self.initial_reference}."
            )
        grid = {float(self.initial_reference)}
        for candidate in candidates:
            grid.update(candidate.values)
        object.__setattr__(self, "_grid", tuple(sorted(grid)))

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def reference_grid(self) -> Tuple[float, ...]:
        """Union of all supports and the initial reference, ascending."""
        return self._grid

    @property
    def digest(self) -> str:
        """Stable content hash used to tie tables and verdicts to an instance."""
        payload = json.dumps(self.to_json_dict(), sort_keys=True)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]

    def with_lambda(self, lam: float) -> "Instance":
        return replace(self, lam=float(lam))

    def reordered(self, permutation: Sequence[int]) -> "Instance":
        return replace(self, candidates=tuple(self.candidates[i] for i in permutation))

    def truncated(self, count: int) -> "Instance":
        """Keep the first ``count`` candidates."""
        return replace(self, candidates=self.candidates[:count])

    def without_first(self) -> "Instance":
        return replace(self, candidates=self.candidates[1:])

    def to_json_dict(self) -> Dict[str, object]:
        return {
            "lambda": self.lam,
            "initial_reference": self.initial_reference,
            "candidates": [c.to_json_dict() for c in self.candidates],
        }


def make_distribution(
    pairs: Iterable[Tuple[float, float]], tolerance: float = INGESTION_TOLERANCE
) -> DiscreteDistribution:
    """Build a canonical distribution from (value, probability) pairs.

    Equal values are merged, zero-probability atoms dropped, and the probabilities
    renormalized when their sum is within ``tolerance`` of one.

    Args:
        pairs: Iterable of (value, probability) pairs in any order.
        tolerance: Allowed distance of the probability sum from one.

    Returns:
        DiscreteDistribution: The canonical distribution.

    Raises:
        EmptySupport: If no pair has positive probability.
        NegativeValue: If any value is negative.
        NegativeProbability: If any probability is negative.
        ProbabilitySumOutOfTolerance: If the probabilities do not sum to one.
    """
    merged: Dict[float, List[float]] = {}
    for value, probability in pairs:
        value, probability = float(value), float(probability)
        if value < 0 or math.isnan(value):
            raise NegativeValue(f"Value {value} is negative.")
        if probability < 0 or math.isnan(probability):
            raise NegativeProbability(f"Probability {probability} is negative.")
        merged.setdefault(value, []).append(probability)

    if not merged:
        raise EmptySupport("No atoms given.")

    total = math.fsum(p for ps in merged.values() for p in ps)
    if abs(total - 1.0) > tolerance:
        raise ProbabilitySumOutOfTolerance(
            f"Probabilities sum to {total!r}; allowed deviation from 1 is {tolerance}."
        )

    atoms = [
        (value, math.fsum(ps) / total)
        for value, ps in sorted(merged.items())
        if math.fsum(ps) > 0
    ]
    if not atoms:
        raise EmptySupport("Every atom has zero probability.")
    return DiscreteDistribution(
        values=tuple(v for v, _ in atoms), probabilities=tuple(p for _, p in atoms)
    )


def point_mass(value: float) -> DiscreteDistribution:
    return DiscreteDistribution(values=(float(value),), probabilities=(1.0,))


def expectation(distribution: DiscreteDistribution) -> float:
    return math.fsum(v * p for v, p in distribution.atoms)


def tail_probability(
    distribution: DiscreteDistribution, threshold: float, strict: bool
) -> float:
    """Pr(X > threshold) when ``strict``, else Pr(X >= threshold)."""
    if strict:
        return math.fsum(p for v, p in distribution.atoms if v > threshold)
    return math.fsum(p for v, p in distribution.atoms if v >= threshold)


def max_distribution(instance: Instance) -> DiscreteDistribution:
    """Exact distribution of the hindsight maximum of independent candidates.

    Pr(V* <= x) is the product of the candidate CDFs, evaluated on the union of the
    supports; differencing gives the atoms of V*.
    """
    support = np.asarray(
        sorted({v for c in instance.candidates for v in c.values}), dtype=float
    )
    joint_cdf = np.ones_like(support)
    for candidate in instance.candidates:
        values, probabilities = candidate.as_arrays()
        cumulative = np.concatenate(([0.0], np.cumsum(probabilities)))
        joint_cdf *= cumulative[np.searchsorted(values, support, side="right")]

    # The last CDF value is a product of ones up to rounding; pin it.
    joint_cdf[-1] = 1.0
    masses = np.diff(joint_cdf, prepend=0.0)
    keep = masses > 0
    masses = masses[keep] / masses[keep].sum()
    return DiscreteDistribution(
        values=tuple(support[keep].tolist()), probabilities=tuple(masses.tolist())
    )


def as_two_point(distribution: DiscreteDistribution) -> TwoPointDistribution:
    """View a distribution with at most two atoms as a 2-point candidate."""
    if distribution.support_size > 2:
        raise NotTwoPoint(
            f"Distribution has {distribution.support_size} atoms; at most 2 allowed."
        )
    low, high = distribution.values[0], distribution.values[-1]
    p_high = distribution.probabilities[-1] if distribution.support_size == 2 else 1.0
    return TwoPointDistribution(high=high, low=low, p_high=p_high)
