import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from Objects.distributions import DiscreteDistribution
from Objects.errors import ReferenceNotOnGrid


class Decision(str, Enum):
    STOP = "Stop"
    CONTINUE = "Continue"


class PropertyId(str, Enum):
    """Catalog of checkable statements about loss-averse stopping."""

    P1 = "P1"  # utility nonincreasing in the reference value
    P2 = "P2"  # utility nonincreasing in lambda
    P3 = "P3"  # larger lambda stops whenever smaller lambda stops
    P4 = "P4"  # selected value nonincreasing in lambda
    P5 = "P5"  # appending a candidate never hurts
    P6 = "P6"  # prepending loses at most a factor lambda + 1
    P7 = "P7"  # prophet ratio at most lambda + 2
    P8 = "P8"  # unbiased ratio at most lambda + 1
    P9 = "P9"  # random order ratio at most n
    P10 = "P10"  # random order ratio at most rho
    P11 = "P11"  # calibrated threshold strategy
    P12 = "P12"  # best of the two 2-point orderings within a factor 2


@dataclass(frozen=True)
class DPTable:
    """Solved value function of a lambda-biased agent.

    ``utility[i, t - 1]`` is U[grid[i], t] for t = 1..n; the extra last column is the
    zero continuation sentinel. ``stops[t - 1][i, a]`` is the decision at reference
    ``grid[i]`` when candidate t realizes its a-th atom, and ``margins`` holds the
    matching stop-minus-continue utilities (``inf`` at the forced last step).
    """

    grid: np.ndarray
    utility: np.ndarray
    stops: Tuple[np.ndarray, ...]
    margins: Tuple[np.ndarray, ...]
    supports: Tuple[DiscreteDistribution, ...]
    lam: float
    initial_reference: float
    indifference_tol: float
    instance_digest: str

    @property
    def n(self) -> int:
        return len(self.supports)

    @property
    def root_utility(self) -> float:
        return float(self.utility[self.index_of(self.initial_reference), 0])

    def index_of(self, reference: float) -> int:
        """Grid position of ``reference``; exact match required."""
        position = int(np.searchsorted(self.grid, reference))
        if position >= len(self.grid) or self.grid[position] != reference:
            raise ReferenceNotOnGrid(
                f"Reference value {reference!r} is not on the grid "
                f"{self.grid.tolist()}."
            )
        return position

    def utility_at(self, reference: float, t: int) -> float:
        """U[reference, t] with 1-based t; t = n + 1 reads the sentinel."""
        return float(self.utility[self.index_of(reference), t - 1])

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "initial_reference": self.initial_reference,
            "instance_digest": self.instance_digest,
            "grid": self.grid.tolist(),
            "utility": [
                {"t": t + 1, "values": self.utility[:, t].tolist()}
                for t in range(self.n)
            ],
            "decisions": [
                {
                    "t": t + 1,
                    "support": list(self.supports[t].values),
                    "stop": self.stops[t].astype(int).tolist(),
                }
                for t in range(self.n)
            ],
        }


@dataclass(frozen=True)
class ThresholdPolicy:
    """Stop thresholds theta[i, t - 1] per reference value and time.

    The column of the last candidate holds ``-inf``: the agent always stops there.
    """

    grid: np.ndarray
    theta: np.ndarray
    lam: float

    def theta_at(self, reference: float, t: int) -> float:
        position = int(np.searchsorted(self.grid, reference))
        if position >= len(self.grid) or self.grid[position] != reference:
            raise ReferenceNotOnGrid(
                f"Reference value {reference!r} is not on the grid."
            )
        return float(self.theta[position, t - 1])


@dataclass
class EvaluationReport:
    """Exact expectations of one stopping strategy on one instance.

    Attributes:
        expected_value: E[V(sigma)], the value of the selected candidate.
        expected_loss: E[L(sigma)], the shortfall against the reference at selection.
        expected_utility: expected_value minus lambda times expected_loss.
        stop_time_distribution: (t, probability) pairs, 1-based t.
        value_distribution: (value, probability) pairs of the selected value, ascending.
    """

    expected_value: float
    expected_loss: float
    expected_utility: float
    stop_time_distribution: List[Tuple[int, float]] = field(default_factory=list)
    value_distribution: List[Tuple[float, float]] = field(default_factory=list)

    def probability_selected_above(self, threshold: float, strict: bool) -> float:
        """Pr(V(sigma) > threshold), or >= when ``strict`` is false."""
        if strict:
            return math.fsum(p for v, p in self.value_distribution if v > threshold)
        return math.fsum(p for v, p in self.value_distribution if v >= threshold)

    def to_row(self) -> Dict[str, Any]:
        return {
            "expected_value": self.expected_value,
            "expected_loss": self.expected_loss,
            "expected_utility": self.expected_utility,
        }


@dataclass(frozen=True)
class RandomizedThresholdStrategy:
    """Select the first value above ``theta``; a value equal to ``theta`` is taken
    with probability ``q``. The last candidate is always taken.

    ``selection_probability`` is Pr(V(tau) >= theta) achieved on the instance the
    strategy was calibrated on.
    """

    theta: float
    q: float
    alpha: float
    selection_probability: float = float("nan")

    def stop_probability(self, value: float) -> float:
        if value > self.theta:
            return 1.0
        if value == self.theta:
            return self.q
        return 0.0


@dataclass(frozen=True)
class OrderingResult:
    """An arrival order (0-based candidate indices) and its exact outcome."""

    permutation: Tuple[int, ...]
    expected_value: float
    expected_utility: float
    label: str = ""

    def to_row(self) -> Dict[str, Any]:
        return {
            "ordering": self.label,
            "permutation": " ".join(str(i) for i in self.permutation),
            "expected_value": self.expected_value,
            "expected_utility": self.expected_utility,
        }


@dataclass(frozen=True)
class RhoSolution:
    lam: float
    rho: float
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class RandomOrderEstimate:
    """Value and utility under a uniformly random arrival order.

    ``samples`` is zero for exact results; ``standard_error`` is then zero as well.
    """

    value: float
    utility: float
    standard_error: float = 0.0
    utility_standard_error: float = 0.0
    samples: int = 0
    kind: str = "exact"


@dataclass
class PropertyVerdict:
    """Outcome of one property check on one instance.

    ``slack`` is the smallest margin by which the checked inequalities held (negative
    when one failed). ``witness`` describes the first failing state and is ``None``
    exactly when the check passed. ``warnings`` lists tolerated failures, such as
    patience violations on states no policy reaches.
    """

    property_id: PropertyId
    instance_digest: str
    passed: bool
    slack: float
    lambdas: Tuple[float, ...] = ()
    witness: Optional[Dict[str, Any]] = None
    warnings: List[str] = field(default_factory=list)
    label: str = ""

    def to_row(self) -> Dict[str, Any]:
        return {
            "property": self.property_id.value,
            "instance": self.label or self.instance_digest,
            "instance_digest": self.instance_digest,
            "lambdas": " ".join(f"{lam:g}" for lam in self.lambdas),
            "passed": self.passed,
            "slack": self.slack,
            "witness": self.witness,
            "warnings": len(self.warnings),
        }
