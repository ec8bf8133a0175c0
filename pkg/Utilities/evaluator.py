"""Exact evaluation of stopping strategies, the brute-force oracle and ratio reports."""
import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from Objects.distributions import (
    Instance,
    expectation,
    max_distribution,
    tail_probability,
)
from Objects.errors import (
    AlphaOutOfRange,
    DivisionByZeroValue,
    InstanceTooLarge,
    TableInstanceMismatch,
)
from Objects.objects import DPTable, EvaluationReport, RandomizedThresholdStrategy
from realizations import realization_count
from Utilities.dp_solver import SolverSettings, next_references, solve
from Utilities.utilities import Utilities

logger = logging.getLogger(__name__)

# Maps (1-based t, grid, support values) to the probability of stopping per state.
StopRule = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


class EvaluatorSettings(BaseModel):
    brute_force_cap: int = Field(
        default=10**6,
        title="Brute Force Cap",
        description="Most joint realizations the history-tree oracle may walk.",
        ge=1,
    )
    calibration_tol: float = Field(
        default=1e-14,
        title="Calibration Tolerance",
        description="Residual accepted when solving for the tie-breaking q.",
        gt=0.0,
    )


def _forward(instance: Instance, stop_rule: StopRule) -> EvaluationReport:
    """Push probability mass over (time, reference value) until the agent stops."""
    grid = np.asarray(instance.reference_grid, dtype=float)
    lam = instance.lam
    mass = np.zeros(len(grid))
    mass[Utilities.grid_index(grid, instance.initial_reference)] = 1.0

    expected_value = expected_loss = 0.0
    stop_times: Dict[int, float] = {}
    selected: Dict[float, float] = {}

    for t, candidate in enumerate(instance.candidates, start=1):
        values, probabilities = candidate.as_arrays()
        stop_probability = stop_rule(t, grid, values)
        joint = mass[:, None] * probabilities[None, :]
        stopped = joint * stop_probability
        losses = np.maximum(grid[:, None] - values[None, :], 0.0)

        expected_value += float((stopped * values[None, :]).sum())
        expected_loss += float((stopped * losses).sum())
        stop_times[t] = float(stopped.sum())
        for value, weight in zip(values.tolist(), stopped.sum(axis=0).tolist()):
            selected[value] = selected.get(value, 0.0) + weight

        mass = np.zeros(len(grid))
        np.add.at(mass, next_references(grid, values), joint - stopped)

    return EvaluationReport(
        expected_value=expected_value,
        expected_loss=expected_loss,
        expected_utility=expected_value - lam * expected_loss,
        stop_time_distribution=sorted(stop_times.items()),
        value_distribution=Utilities.sorted_pairs(selected),
    )


def evaluate_policy(instance: Instance, table: DPTable) -> EvaluationReport:
    """Exact outcome of the solved policy on its own instance.

    Raises:
        TableInstanceMismatch: If the table was solved for another instance.
    """
    if table.instance_digest != instance.digest:
        raise TableInstanceMismatch(
            f"Table belongs to instance {table.instance_digest}, "
            f"not {instance.digest}."
        )
    return _forward(
        instance, lambda t, grid, values: table.stops[t - 1].astype(float)
    )


def evaluate_threshold(
    instance: Instance, strategy: RandomizedThresholdStrategy
) -> EvaluationReport:
    """Exact outcome of a randomized threshold strategy.

    Values above ``theta`` are taken, values equal to it with probability ``q``
    (independently per candidate), and the last candidate always.
    """

    def stop_rule(t: int, grid: np.ndarray, values: np.ndarray) -> np.ndarray:
        if t == instance.n:
            row = np.ones_like(values)
        else:
            row = np.array([strategy.stop_probability(x) for x in values.tolist()])
        return np.broadcast_to(row, (len(grid), len(values)))

    return _forward(instance, stop_rule)


def brute_force_optimal(
    instance: Instance, settings: Optional[EvaluatorSettings] = None
) -> EvaluationReport:
    """Optimal strategy by backward induction over the full history tree.

    The reference value is recomputed from every history, so no state is merged.
    Ties go to stopping within the default indifference tolerance.

    Raises:
        InstanceTooLarge: If the tree has more leaves than the configured cap.
    """
    settings = settings or EvaluatorSettings()
    leaves = realization_count(instance.candidates)
    if leaves > settings.brute_force_cap:
        raise InstanceTooLarge(
            f"{leaves} joint realizations exceed the cap of {settings.brute_force_cap}."
        )

    lam, tol = instance.lam, SolverSettings().indifference_tol
    n = instance.n

    def best(history: Tuple[float, ...]) -> Tuple[float, float, float, dict, dict]:
        # Returns utility, value, loss, stop-time masses and selected-value masses.
        t = len(history) + 1
        reference = max((instance.initial_reference,) + history)
        utility = value = loss = 0.0
        stop_times: Dict[int, float] = {}
        selected: Dict[float, float] = {}
        for x, p in instance.candidates[t - 1].atoms:
            shortfall = max(reference - x, 0.0)
            stop_util = x - lam * shortfall
            branch = (stop_util, x, shortfall, {t: 1.0}, {x: 1.0})
            if t < n:
                following = best(history + (x,))
                if stop_util < following[0] - tol:
                    branch = following
            utility += p * branch[0]
            value += p * branch[1]
            loss += p * branch[2]
            for key, weight in branch[3].items():
                stop_times[key] = stop_times.get(key, 0.0) + p * weight
            for key, weight in branch[4].items():
                selected[key] = selected.get(key, 0.0) + p * weight
        return utility, value, loss, stop_times, selected

    utility, value, loss, stop_times, selected = best(())
    return EvaluationReport(
        expected_value=value,
        expected_loss=loss,
        expected_utility=utility,
        stop_time_distribution=sorted(stop_times.items()),
        value_distribution=Utilities.sorted_pairs(selected),
    )


def threshold_selection_probability(
    instance: Instance, theta: float, q: float
) -> float:
    """Pr(V(tau) >= theta) for the randomized threshold strategy, in closed form.

    The strategy misses every value at or above ``theta`` only if each non-final
    candidate is below ``theta`` or ties and loses the coin, and the final one is below.
    """
    candidates = instance.candidates
    miss = 1.0 - tail_probability(candidates[-1], theta, strict=False)
    for candidate in candidates[:-1]:
        below = 1.0 - tail_probability(candidate, theta, strict=False)
        miss *= below + (1.0 - q) * candidate.probability_of(theta)
    return 1.0 - miss


def calibrate_threshold(
    instance: Instance,
    alpha: float,
    settings: Optional[EvaluatorSettings] = None,
) -> RandomizedThresholdStrategy:
    """Randomized threshold strategy selecting a value >= theta w.p. alpha.

    theta is the smallest atom of V* with Pr(V* > theta) < alpha.
    q is zero when the forced last selection already reaches alpha, and otherwise
    solves Pr(V(tau) >= theta) = alpha.

    Raises:
        AlphaOutOfRange: If alpha is outside (0, 1).
    """
    settings = settings or EvaluatorSettings()
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {alpha}.")

    vstar = max_distribution(instance)
    theta = next(
        x for x in vstar.values if tail_probability(vstar, x, strict=True) < alpha
    )

    at_zero = threshold_selection_probability(instance, theta, 0.0)
    at_one = threshold_selection_probability(instance, theta, 1.0)
    if at_zero >= alpha or at_one - at_zero <= settings.calibration_tol:
        logger.debug("calibration at theta=%r needs no tie-breaking", theta)
        return RandomizedThresholdStrategy(
            theta=theta, q=0.0, alpha=alpha, selection_probability=at_zero
        )

    q, _ = Utilities.bisect(
        lambda q: threshold_selection_probability(instance, theta, q) - alpha,
        0.0,
        1.0,
        tol=settings.calibration_tol,
    )
    logger.debug("calibrated theta=%r q=%r for alpha=%r", theta, q, alpha)
    return RandomizedThresholdStrategy(
        theta=theta,
        q=q,
        alpha=alpha,
        selection_probability=threshold_selection_probability(instance, theta, q),
    )


def ratio(numerator: float, denominator: float) -> float:
    """numerator / denominator, with 0 / 0 read as 1."""
    if denominator == 0.0:
        if numerator == 0.0:
            return 1.0
        raise DivisionByZeroValue(
            f"Cannot divide {numerator!r} by a zero expected value."
        )
    return numerator / denominator


def ratio_report(
    instance: Instance, settings: Optional[SolverSettings] = None
) -> Tuple[float, float]:
    """Prophet ratio E[V*]/E[V_lambda] and unbiased ratio E[V_0]/E[V_lambda].

    Raises:
        DivisionByZeroValue: If the biased agent's expected value is zero.
    """
    biased = evaluate_policy(instance, solve(instance, settings))
    rational_instance = instance.with_lambda(0.0)
    rational = evaluate_policy(rational_instance, solve(rational_instance, settings))
    if biased.expected_value == 0.0:
        raise DivisionByZeroValue("The biased agent's expected value is zero.")
    prophet = expectation(max_distribution(instance))
    return (
        prophet / biased.expected_value,
        rational.expected_value / biased.expected_value,
    )


def loss_bound(strategy: RandomizedThresholdStrategy) -> float:
    """Upper bound (1 - alpha) * theta on the calibrated strategy's expected loss."""
    return (1.0 - strategy.alpha) * strategy.theta


def prophet_value(instance: Instance) -> float:
    return expectation(max_distribution(instance))


def stop_probability_sum(report: EvaluationReport) -> float:
    return math.fsum(p for _, p in report.stop_time_distribution)
