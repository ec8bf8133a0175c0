"""Backward induction for the lambda-biased agent and its threshold form."""
import logging
from typing import List, Optional, Set

import numpy as np
from pydantic import BaseModel, Field

from Objects.distributions import Instance
from Objects.errors import TimeOutOfRange, ValueNotInSupport
from Objects.objects import Decision, DPTable, ThresholdPolicy

logger = logging.getLogger(__name__)


class SolverSettings(BaseModel):
    """Knobs of the backward induction."""

    indifference_tol: float = Field(
        default=1e-12,
        title="Indifference Tolerance",
        description=(
            "Stopping is chosen when its utility is at least the continuation "
            "utility minus this tolerance. Ties go to stopping."
        ),
        ge=0.0,
    )
    flip_first_decisions: bool = Field(
        default=False,
        title="Flip First Decisions",
        description=(
            "Invert every decision at the first candidate. Only used to check "
            "that the property suite notices a broken decision rule."
        ),
    )


def stop_utilities(grid: np.ndarray, values: np.ndarray, lam: float) -> np.ndarray:
    """Utility of stopping on each value, per reference value: x - lam * (v - x)^+."""
    return values[None, :] - lam * np.maximum(grid[:, None] - values[None, :], 0.0)


def next_references(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Grid indices of max(v, x) for every reference v and value x."""
    return np.searchsorted(grid, np.maximum(grid[:, None], values[None, :]))


def solve(instance: Instance, settings: Optional[SolverSettings] = None) -> DPTable:
    """Solve U[v, t] for every reference value on the grid and every time.

    Args:
        instance (Instance): Candidates, lambda and initial reference.
        settings (SolverSettings, optional): Tolerance and mutation flags.

    Returns:
        DPTable: Utilities, decisions and stop margins.
    """
    settings = settings or SolverSettings()
    grid = np.asarray(instance.reference_grid, dtype=float)
    n, lam, tol = instance.n, instance.lam, settings.indifference_tol

    utility = np.zeros((len(grid), n + 1))
    stops: List[np.ndarray] = [np.empty(0)] * n
    margins: List[np.ndarray] = [np.empty(0)] * n

    for t in range(n, 0, -1):
        values, probabilities = instance.candidates[t - 1].as_arrays()
        stop_util = stop_utilities(grid, values, lam)

        if t == n:
            # The last candidate is always taken.
            stop = np.ones_like(stop_util, dtype=bool)
            margin = np.full_like(stop_util, np.inf)
            chosen = stop_util
        else:
            continuation = utility[next_references(grid, values), t]
            margin = stop_util - continuation
            stop = margin >= -tol
            if settings.flip_first_decisions and t == 1:
                stop = ~stop
            chosen = np.where(stop, stop_util, continuation)

        utility[:, t - 1] = chosen @ probabilities
        stops[t - 1] = stop
        margins[t - 1] = margin

    logger.debug(
        "solved n=%d lambda=%g on a grid of %d reference values", n, lam, len(grid)
    )
    return DPTable(
        grid=grid,
        utility=utility,
        stops=tuple(stops),
        margins=tuple(margins),
        supports=instance.candidates,
        lam=lam,
        initial_reference=instance.initial_reference,
        indifference_tol=tol,
        instance_digest=instance.digest,
    )


def decide(table: DPTable, t: int, v_ref: float, v_t: float) -> Decision:
    """Decision of the solved policy at time ``t`` (1-based)."""
    if not 1 <= t <= table.n:
        raise TimeOutOfRange(f"t must lie in [1, {table.n}], got {t}.")
    reference_index = table.index_of(v_ref)
    support = table.supports[t - 1].values
    if v_t not in support:
        raise ValueNotInSupport(
            f"Value {v_t!r} is not in the support {support} of candidate {t}."
        )
    stop = table.stops[t - 1][reference_index, support.index(v_t)]
    return Decision.STOP if stop else Decision.CONTINUE


def thresholds(table: DPTable) -> ThresholdPolicy:
    """Threshold form of the solved policy.

    Where the reference value v exceeds the continuation utility U[v, t+1] the
    threshold is (U[v, t+1] + lam * v) / (1 + lam). Otherwise it is the smallest grid
    value u >= v whose stop utility covers U[u, t+1].
    """
    grid, lam, tol = table.grid, table.lam, table.indifference_tol
    theta = np.full((len(grid), table.n), -np.inf)

    for t in range(1, table.n):
        continuation = table.utility[:, t]
        covered = grid >= continuation - tol
        # The top grid value always covers its own continuation, so argmax is defined.
        for i, v in enumerate(grid):
            if v > continuation[i]:
                theta[i, t - 1] = (continuation[i] + lam * v) / (1.0 + lam)
            else:
                theta[i, t - 1] = grid[i + int(np.argmax(covered[i:]))]

    return ThresholdPolicy(grid=grid, theta=theta, lam=lam)


def reachable_references(
    instance: Instance, table: Optional[DPTable] = None
) -> List[Set[float]]:
    """Reference values that occur with positive probability before each candidate.

    Without a table every realizable running maximum counts. With a table only the
    states the table's policy reaches without having stopped are kept.
    """
    reachable: List[Set[float]] = []
    current = {instance.initial_reference}
    for t, candidate in enumerate(instance.candidates, start=1):
        reachable.append(current)
        following = set()
        for v in current:
            for a, x in enumerate(candidate.values):
                if table is not None and table.stops[t - 1][table.index_of(v), a]:
                    continue
                following.add(max(v, x))
        current = following
    return reachable
