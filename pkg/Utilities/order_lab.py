"""Random arrival orders and chosen arrival orders.

The random-order agent knows the whole candidate set and sees which candidate
arrives, so it always knows the set still to come. Its optimal rule is solved by a
recursion over (remaining set, reference value).
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from Objects.distributions import (
    Instance,
    as_two_point,
    expectation,
    max_distribution,
    tail_probability,
)
from Objects.errors import (
    ExactModeTooLarge,
    InvalidLambda,
    TooManyCandidates,
)
from Objects.objects import (
    OrderingResult,
    RandomizedThresholdStrategy,
    RandomOrderEstimate,
    RhoSolution,
)
from Utilities.dp_solver import SolverSettings, solve
from Utilities.evaluator import evaluate_policy, prophet_value
from Utilities.utilities import Utilities

logger = logging.getLogger(__name__)

EXACT_MAX_CANDIDATES = 10
MONTE_CARLO_MAX_CANDIDATES = 14
EXHAUSTIVE_MAX_CANDIDATES = 8
RHO_LOWER = 1.0 + 1e-12

# (utility, value, loss) of one state or one branch
Outcome = Tuple[float, float, float]


class RandomOrderMode(BaseModel):
    """How the random-order value is computed."""

    kind: Literal["exact", "mc"] = Field(
        default="exact",
        title="Mode",
        description="Exact recursion over remaining sets, or Monte Carlo over orders.",
    )
    samples: int = Field(
        default=100_000,
        title="Samples",
        description="Number of sampled arrival orders in Monte Carlo mode.",
        ge=2,
    )
    seed: Optional[int] = Field(
        default=None,
        title="Seed",
        description="Root seed; each worker draws from its own spawned substream.",
        ge=0,
    )
    workers: int = Field(
        default=1,
        title="Workers",
        description="Number of Monte Carlo worker threads.",
        ge=1,
        le=64,
    )

    @model_validator(mode="after")
    def _seed_for_monte_carlo(self) -> "RandomOrderMode":
        if self.kind == "mc" and self.seed is None:
            raise ValueError("Monte Carlo mode requires an explicit seed.")
        return self


class RandomOrderSolver:
    """Memoized recursion over (remaining candidates, reference value).

    Without a ``rule`` the agent follows the optimal adaptive rule, stopping on ties.
    A ``rule`` maps an observed value to a stop probability and is applied to every
    candidate but the last one.
    A solver and its memo tables belong to a single thread.
    """

    def __init__(
        self,
        instance: Instance,
        rule: Optional[Callable[[float], float]] = None,
        indifference_tol: float = SolverSettings().indifference_tol,
    ):
        self.instance = instance
        self.rule = rule
        self.tol = indifference_tol
        self.grid = instance.reference_grid
        self.positions = {v: i for i, v in enumerate(self.grid)}
        self._states: Dict[Tuple[int, int], Outcome] = {}
        self.orders: Dict[Tuple[int, ...], Tuple[float, float]] = {}
        self.full_mask = (1 << instance.n) - 1

    def root(self) -> Outcome:
        start = self.positions[self.instance.initial_reference]
        return self.state(self.full_mask, start)

    def state(self, mask: int, reference_index: int) -> Outcome:
        key = (mask, reference_index)
        cached = self._states.get(key)
        if cached is not None:
            return cached

        arrivals = [i for i in range(self.instance.n) if mask >> i & 1]
        share = 1.0 / len(arrivals)
        utility = value = loss = 0.0
        for i in arrivals:
            rest = mask & ~(1 << i)
            for x, p in self.instance.candidates[i].atoms:
                u, v, ell = self.branch(rest, reference_index, x)
                utility += share * p * u
                value += share * p * v
                loss += share * p * ell

        self._states[key] = (utility, value, loss)
        return self._states[key]

    def stop_probability(self, rest: int, reference_index: int, x: float) -> float:
        """Probability of taking value ``x`` when ``rest`` is still to come."""
        if rest == 0:
            return 1.0
        if self.rule is not None:
            return self.rule(x)
        reference = self.grid[reference_index]
        stop_util = x - self.instance.lam * max(reference - x, 0.0)
        continuation = self.state(rest, self.positions[max(reference, x)])
        return 1.0 if stop_util >= continuation[0] - self.tol else 0.0

    def branch(self, rest: int, reference_index: int, x: float) -> Outcome:
        reference = self.grid[reference_index]
        shortfall = max(reference - x, 0.0)
        s = self.stop_probability(rest, reference_index, x)
        stopped = (x - self.instance.lam * shortfall, x, shortfall)
        if s == 1.0:
            return stopped
        following = self.state(rest, self.positions[max(reference, x)])
        return tuple(s * a + (1.0 - s) * b for a, b in zip(stopped, following))


def evaluate_arrival_order(
    solver: RandomOrderSolver, permutation: Sequence[int]
) -> Tuple[float, float]:
    """Exact (value, utility) of the solver's rule along one arrival order."""
    key = tuple(permutation)
    cached = solver.orders.get(key)
    if cached is not None:
        return cached

    instance, grid = solver.instance, solver.grid
    masses = {solver.positions[instance.initial_reference]: 1.0}
    mask = solver.full_mask
    value = loss = 0.0
    for i in key:
        mask &= ~(1 << i)
        following: Dict[int, float] = {}
        for reference_index, mass in masses.items():
            reference = grid[reference_index]
            for x, p in instance.candidates[i].atoms:
                s = solver.stop_probability(mask, reference_index, x)
                value += mass * p * s * x
                loss += mass * p * s * max(reference - x, 0.0)
                if s < 1.0:
                    target = solver.positions[max(reference, x)]
                    carried = mass * p * (1.0 - s)
                    following[target] = following.get(target, 0.0) + carried
        masses = following

    solver.orders[key] = (value, value - instance.lam * loss)
    return solver.orders[key]


def _identical_candidates(instance: Instance) -> bool:
    return all(c == instance.candidates[0] for c in instance.candidates)


def _monte_carlo(
    solver: RandomOrderSolver, mode: RandomOrderMode
) -> RandomOrderEstimate:
    n = solver.instance.n
    children = np.random.SeedSequence(mode.seed).spawn(mode.workers)
    base, extra = divmod(mode.samples, mode.workers)
    counts = [base + (1 if w < extra else 0) for w in range(mode.workers)]

    def worker(child: np.random.SeedSequence, count: int) -> np.ndarray:
        # Memo tables are per thread; a worker never writes another one's.
        local = RandomOrderSolver(solver.instance, solver.rule, solver.tol)
        rng = np.random.default_rng(child)
        draws = np.empty((count, 2))
        for k in range(count):
            draws[k] = evaluate_arrival_order(local, rng.permutation(n).tolist())
        return draws

    with ThreadPoolExecutor(max_workers=mode.workers) as pool:
        # map keeps worker order, so the merge is independent of scheduling
        draws = np.concatenate(list(pool.map(worker, children, counts)))

    scale = math.sqrt(len(draws))
    return RandomOrderEstimate(
        value=float(draws[:, 0].mean()),
        utility=float(draws[:, 1].mean()),
        standard_error=float(draws[:, 0].std(ddof=1) / scale),
        utility_standard_error=float(draws[:, 1].std(ddof=1) / scale),
        samples=len(draws),
        kind="mc",
    )


def random_order_estimate(
    instance: Instance,
    mode: Optional[RandomOrderMode] = None,
    settings: Optional[SolverSettings] = None,
) -> RandomOrderEstimate:
    """Value and utility of the optimal adaptive rule under a uniform arrival order.

    Raises:
        ExactModeTooLarge: If the recursion over remaining sets is too large.
    """
    mode = mode or RandomOrderMode()
    settings = settings or SolverSettings()

    if mode.kind == "exact" and _identical_candidates(instance):
        report = evaluate_policy(instance, solve(instance, settings))
        return RandomOrderEstimate(
            value=report.expected_value, utility=report.expected_utility
        )

    cap = EXACT_MAX_CANDIDATES if mode.kind == "exact" else MONTE_CARLO_MAX_CANDIDATES
    if instance.n > cap:
        raise ExactModeTooLarge(
            f"{instance.n} distinct candidates need 2^{instance.n} remaining sets; "
            f"{mode.kind} mode allows at most {cap}."
        )

    solver = RandomOrderSolver(instance, indifference_tol=settings.indifference_tol)
    if mode.kind == "mc":
        return _monte_carlo(solver, mode)

    utility, value, _ = solver.root()
    logger.debug("random order recursion visited %d states", len(solver._states))
    return RandomOrderEstimate(value=value, utility=utility)


def random_order_value(
    instance: Instance,
    mode: Optional[RandomOrderMode] = None,
    settings: Optional[SolverSettings] = None,
) -> float:
    return random_order_estimate(instance, mode, settings).value


def solve_rho(lam: float, tol: float = 1e-12) -> RhoSolution:
    """Unique root rho > 1 of rho - (rho - 1)/(lam + 1) = ln(lam + 1) - ln(1 - 1/rho).

    The left side is nondecreasing and the right side strictly decreasing in rho, so
    their difference is bisected on a bracket that is widened until it changes sign.

    Raises:
        InvalidLambda: If lam is negative.
        ToleranceNotReached: If bisection stalls.
    """
    if lam < 0 or math.isnan(lam):
        raise InvalidLambda(f"lambda must be nonnegative, got {lam}.")

    def residual(rho: float) -> float:
        left = rho - (rho - 1.0) / (lam + 1.0)
        right = math.log1p(lam) - math.log1p(-1.0 / rho)
        return left - right

    upper = max(2.0, math.log1p(lam) + 3.0)
    while residual(upper) <= 0.0:
        upper *= 2.0

    rho, iterations = Utilities.bisect(residual, RHO_LOWER, upper, tol=tol)
    return RhoSolution(lam=lam, rho=rho, residual=residual(rho), iterations=iterations)


def random_order_selection_probability(
    instance: Instance, theta: float, q: float
) -> float:
    """Pr(V(tau) >= theta) for the randomized threshold rule under a uniform order.

    Everything at or above theta is missed only when every non-final candidate is
    below theta (or ties and loses the coin) and the final one is below theta; this
    depends on the order only through which candidate comes last.
    """
    below = [
        1.0 - tail_probability(c, theta, strict=False) for c in instance.candidates
    ]
    ties = [c.probability_of(theta) for c in instance.candidates]
    kept = [b + (1.0 - q) * tie for b, tie in zip(below, ties)]
    miss = math.fsum(
        below[last] * math.prod(k for j, k in enumerate(kept) if j != last)
        for last in range(instance.n)
    )
    return 1.0 - miss / instance.n


def random_order_threshold_value(
    instance: Instance, tol: float = 1e-14
) -> Tuple[RandomizedThresholdStrategy, RandomOrderEstimate]:
    """The threshold rule behind the rho bound, evaluated exactly over arrival orders.

    theta and the tie-breaking probability are chosen so that the rule ends below
    theta with probability (1 - 1/rho) / (lam + 1).

    Raises:
        ExactModeTooLarge: If the recursion over remaining sets is too large.
    """
    if instance.n > EXACT_MAX_CANDIDATES:
        raise ExactModeTooLarge(
            f"Threshold evaluation allows at most {EXACT_MAX_CANDIDATES} candidates."
        )
    rho = solve_rho(instance.lam).rho
    alpha = 1.0 - (1.0 - 1.0 / rho) / (instance.lam + 1.0)

    vstar = max_distribution(instance)
    theta = next(
        x for x in vstar.values if tail_probability(vstar, x, strict=True) < alpha
    )
    at_zero = random_order_selection_probability(instance, theta, 0.0)
    at_one = random_order_selection_probability(instance, theta, 1.0)
    q = 0.0
    if at_zero < alpha and at_one - at_zero > tol:
        q, _ = Utilities.bisect(
            lambda q: random_order_selection_probability(instance, theta, q) - alpha,
            0.0,
            1.0,
            tol=tol,
        )
    strategy = RandomizedThresholdStrategy(
        theta=theta,
        q=q,
        alpha=alpha,
        selection_probability=random_order_selection_probability(instance, theta, q),
    )
    solver = RandomOrderSolver(instance, rule=strategy.stop_probability)
    utility, value, _ = solver.root()
    return strategy, RandomOrderEstimate(value=value, utility=utility)


def _evaluate_ordering(
    instance: Instance,
    permutation: Sequence[int],
    label: str,
    settings: Optional[SolverSettings],
) -> OrderingResult:
    ordered = instance.reordered(permutation)
    report = evaluate_policy(ordered, solve(ordered, settings))
    return OrderingResult(
        permutation=tuple(permutation),
        expected_value=report.expected_value,
        expected_utility=report.expected_utility,
        label=label,
    )


def two_point_order_permutations(
    instance: Instance,
) -> Tuple[List[int], List[int]]:
    """Decreasing high values, and the order built around the candidate with the
    largest low value.

    Raises:
        NotTwoPoint: If a candidate has more than two atoms.
    """
    points = [as_two_point(c) for c in instance.candidates]
    decreasing = sorted(range(instance.n), key=lambda i: (-points[i].high, i))
    sharp = min(range(instance.n), key=lambda i: (-points[i].low, i))
    sharp_mean = expectation(instance.candidates[sharp])

    rest = [i for i in decreasing if i != sharp]
    before = [i for i in rest if points[i].high >= sharp_mean]
    after = [i for i in rest if points[i].high < sharp_mean]
    return decreasing, before + [sharp] + after


def two_point_orderings(
    instance: Instance, settings: Optional[SolverSettings] = None
) -> Tuple[OrderingResult, OrderingResult]:
    """Evaluate both constructed orderings under the optimal biased rule."""
    first, second = two_point_order_permutations(instance)
    return (
        _evaluate_ordering(instance, first, "ordering1", settings),
        _evaluate_ordering(instance, second, "ordering2", settings),
    )


def best_ordering_exhaustive(
    instance: Instance, settings: Optional[SolverSettings] = None
) -> OrderingResult:
    """Best arrival order by expected selected value; earliest permutation on ties.

    Raises:
        TooManyCandidates: If there are more than eight candidates.
    """
    if instance.n > EXHAUSTIVE_MAX_CANDIDATES:
        raise TooManyCandidates(
            f"{instance.n} candidates; exhaustive search allows at most "
            f"{EXHAUSTIVE_MAX_CANDIDATES}."
        )
    best: Optional[OrderingResult] = None
    for permutation in itertools.permutations(range(instance.n)):
        result = _evaluate_ordering(instance, permutation, "exhaustive", settings)
        if best is None or result.expected_value > best.expected_value + 1e-12:
            best = result
    return best


def random_order_bounds(instance: Instance) -> Dict[str, float]:
    """Prophet value and the two random-order ratio bounds."""
    return {
        "prophet_value": prophet_value(instance),
        "bound_n": float(instance.n),
        "bound_rho": solve_rho(instance.lam).rho,
    }
