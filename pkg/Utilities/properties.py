"""Checkable statements about loss-averse stopping over small instances."""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from Objects import scenarios
from Objects.distributions import Instance, make_distribution
from Objects.errors import PropertyPreconditionViolated
from Objects.objects import DPTable, EvaluationReport, PropertyId, PropertyVerdict
from Utilities.dp_solver import SolverSettings, reachable_references, solve
from Utilities.evaluator import (
    calibrate_threshold,
    evaluate_policy,
    evaluate_threshold,
    loss_bound,
    prophet_value,
    ratio,
    threshold_selection_probability,
)
from Utilities.order_lab import (
    EXACT_MAX_CANDIDATES,
    EXHAUSTIVE_MAX_CANDIDATES,
    best_ordering_exhaustive,
    random_order_value,
    solve_rho,
    two_point_orderings,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9


class GeneratorConfig(BaseModel):
    """Seeded generator of small instances on a rational value lattice."""

    n_min: int = Field(default=1, title="Fewest Candidates", ge=1)
    n_max: int = Field(default=4, title="Most Candidates", ge=1, le=8)
    support_min: int = Field(default=1, title="Smallest Support", ge=1)
    support_max: int = Field(default=3, title="Largest Support", ge=1)
    lattice_denominator: int = Field(
        default=16,
        title="Lattice Denominator",
        description="Values are multiples of 1 / lattice_denominator.",
        ge=1,
    )
    value_max: float = Field(default=4.0, title="Largest Value", gt=0.0)
    weight_max: int = Field(
        default=8,
        title="Largest Weight",
        description="Atom weights are integers in [1, weight_max], normalized.",
        ge=1,
    )
    lambdas: List[float] = Field(
        default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 5.0],
        title="Loss Aversion Values",
    )
    count: int = Field(default=200, title="Instances", ge=0)
    seed: int = Field(default=42, title="Seed", ge=0)

    @model_validator(mode="after")
    def _ordered_ranges(self) -> "GeneratorConfig":
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max.")
        if self.support_min > self.support_max:
            raise ValueError("support_min must not exceed support_max.")
        if any(lam < 0 for lam in self.lambdas):
            raise ValueError("lambdas must be nonnegative.")
        lattice_size = int(self.value_max * self.lattice_denominator) + 1
        if self.support_max > lattice_size:
            raise ValueError("support_max exceeds the number of lattice values.")
        return self


def generate_instances(config: GeneratorConfig) -> List[Instance]:
    """Instances drawn deterministically from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    lattice = (
        np.arange(int(config.value_max * config.lattice_denominator) + 1)
        / config.lattice_denominator
    )
    instances = []
    for _ in range(config.count):
        n = int(rng.integers(config.n_min, config.n_max + 1))
        candidates = []
        for _ in range(n):
            size = int(rng.integers(config.support_min, config.support_max + 1))
            values = rng.choice(lattice, size=size, replace=False)
            weights = rng.integers(1, config.weight_max + 1, size=size)
            candidates.append(
                make_distribution(
                    zip(values.tolist(), (weights / weights.sum()).tolist())
                )
            )
        instances.append(Instance(candidates=tuple(candidates)))
    return instances


def curated_instances() -> List[Tuple[str, Instance]]:
    """Worked instances, each at its own loss aversion."""
    return [
        ("sec41", scenarios.sec41(2.0)),
        ("sec41_reference2", scenarios.sec41(2.0, initial_reference=2.0)),
        ("example1", scenarios.example1(1.0, 0.1)),
        ("example1_small_epsilon", scenarios.example1(5.0, 0.01)),
        ("iid_n3", scenarios.iid_n(3)),
        ("two_point_tight", scenarios.two_point_tight(0.1)),
    ]


class _Tally:
    """Smallest margin seen and the first state where it dropped below -tol."""

    def __init__(self, tol: float):
        self.tol = tol
        self.slack = math.inf
        self.witness: Optional[Dict[str, Any]] = None
        self.warnings: List[str] = []

    def observe(self, margin: float, **context: Any) -> None:
        margin = float(margin)
        self.slack = min(self.slack, margin)
        if margin < -self.tol and self.witness is None:
            self.witness = {"margin": margin, **context}

    def finish(
        self,
        property_id: PropertyId,
        instance: Instance,
        lambdas: Sequence[float],
        label: str,
    ) -> PropertyVerdict:
        passed = self.witness is None
        if not passed:
            logger.warning(
                "%s failed on %s: %s",
                property_id.value,
                label or instance.digest,
                self.witness,
            )
        return PropertyVerdict(
            property_id=property_id,
            instance_digest=instance.digest,
            passed=passed,
            slack=0.0 if math.isinf(self.slack) else self.slack,
            lambdas=tuple(lambdas),
            witness=self.witness,
            warnings=self.warnings,
            label=label,
        )


class _Workbench:
    """Solved tables and reports of one candidate sequence, cached per lambda."""

    def __init__(self, instance: Instance, settings: SolverSettings):
        self.instance = instance
        self.settings = settings
        self._tables: Dict[Tuple[str, float], DPTable] = {}
        self._reports: Dict[Tuple[str, float], EvaluationReport] = {}
        self._prophet: Optional[float] = None

    def table(self, lam: float, instance: Optional[Instance] = None) -> DPTable:
        instance = (instance or self.instance).with_lambda(lam)
        key = (instance.digest, lam)
        if key not in self._tables:
            self._tables[key] = solve(instance, self.settings)
        return self._tables[key]

    def report(
        self, lam: float, instance: Optional[Instance] = None
    ) -> EvaluationReport:
        instance = (instance or self.instance).with_lambda(lam)
        key = (instance.digest, lam)
        if key not in self._reports:
            self._reports[key] = evaluate_policy(instance, self.table(lam, instance))
        return self._reports[key]

    @property
    def prophet(self) -> float:
        if self._prophet is None:
            self._prophet = prophet_value(self.instance)
        return self._prophet


def _pairs(lambdas: Sequence[float]) -> List[Tuple[float, float]]:
    return list(itertools.combinations(sorted(set(lambdas)), 2))


def _reference_monotone(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for lam in lambdas:
        table = bench.table(lam)
        if len(table.grid) < 2:
            continue
        for t in range(1, table.n + 1):
            drops = table.utility[:-1, t - 1] - table.utility[1:, t - 1]
            i = int(np.argmin(drops))
            tally.observe(
                drops[i], lam=lam, t=t, v_low=table.grid[i], v_high=table.grid[i + 1]
            )


def _utility_lambda_monotone(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for low, high in _pairs(lambdas):
        a, b = bench.table(low), bench.table(high)
        gaps = a.utility[:, : a.n] - b.utility[:, : b.n]
        i, t = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
        tally.observe(gaps[i, t], lambdas=[low, high], t=int(t) + 1, v=a.grid[i])


def _patience(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for low, high in _pairs(lambdas):
        patient, eager = bench.table(low), bench.table(high)
        reachable = reachable_references(bench.instance.with_lambda(high), eager)
        for t in range(1, bench.instance.n):
            stops_low, stops_high = patient.stops[t - 1], eager.stops[t - 1]
            margins = eager.margins[t - 1]
            for i, a in zip(*np.nonzero(stops_low)):
                margin = margins[i, a]
                if not stops_high[i, a]:
                    margin = min(margin, -2 * tally.tol)
                v = float(patient.grid[i])
                x = bench.instance.candidates[t - 1].values[a]
                if margin < -tally.tol and v not in reachable[t - 1]:
                    tally.warnings.append(
                        f"lambda {low} stops but {high} continues at unreachable "
                        f"t={t}, v={v}, x={x}"
                    )
                    continue
                tally.observe(margin, lambdas=[low, high], t=t, v=v, x=x)


def _value_lambda_monotone(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for low, high in _pairs(lambdas):
        tally.observe(
            bench.report(low).expected_value - bench.report(high).expected_value,
            lambdas=[low, high],
        )


def _append(bench: _Workbench, lambdas, tally: _Tally) -> None:
    prefix = bench.instance.truncated(bench.instance.n - 1)
    for lam in lambdas:
        full, short = bench.report(lam), bench.report(lam, prefix)
        tally.observe(
            full.expected_utility - short.expected_utility, lam=lam, measure="utility"
        )
        tally.observe(
            full.expected_value - short.expected_value, lam=lam, measure="value"
        )


def _prepend(bench: _Workbench, lambdas, tally: _Tally) -> None:
    suffix = bench.instance.without_first()
    for lam in lambdas:
        full, short = bench.report(lam), bench.report(lam, suffix)
        tally.observe(
            full.expected_utility - short.expected_utility / (lam + 1.0),
            lam=lam,
            measure="utility",
        )
        tally.observe(
            full.expected_value - short.expected_value / (lam + 1.0),
            lam=lam,
            measure="value",
        )


def _prophet_bound(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for lam in lambdas:
        observed = ratio(bench.prophet, bench.report(lam).expected_value)
        tally.observe(lam + 2.0 - observed, lam=lam, ratio=observed)


def _unbiased_bound(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for lam in lambdas:
        observed = ratio(
            bench.report(0.0).expected_value, bench.report(lam).expected_value
        )
        tally.observe(lam + 1.0 - observed, lam=lam, ratio=observed)


Check = Callable[[_Workbench, Sequence[float], _Tally], None]


def _random_order_bound(use_rho: bool) -> Check:
    def check_bound(bench: _Workbench, lambdas, tally: _Tally) -> None:
        for lam in lambdas:
            instance = bench.instance.with_lambda(lam)
            value = random_order_value(instance, settings=bench.settings)
            observed = ratio(bench.prophet, value)
            bound = solve_rho(lam).rho if use_rho else float(bench.instance.n)
            tally.observe(bound - observed, lam=lam, ratio=observed, bound=bound)

    return check_bound


def _calibrated_threshold(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for lam in lambdas:
        instance = bench.instance.with_lambda(lam)
        alpha = (lam + 1.0) / (lam + 2.0)
        strategy = calibrate_threshold(instance, alpha)
        report = evaluate_threshold(instance, strategy)
        theta = strategy.theta

        achieved = report.probability_selected_above(theta, strict=False)
        if threshold_selection_probability(instance, theta, 0.0) <= alpha + tally.tol:
            gap = -abs(achieved - alpha)
        else:
            gap = achieved - alpha
        tally.observe(gap, lam=lam, measure="selection_probability")

        for y in instance.reference_grid:
            if y < theta:
                tally.observe(
                    report.probability_selected_above(y, strict=True) - alpha,
                    lam=lam,
                    measure="tail_above",
                    y=y,
                )
        tally.observe(
            loss_bound(strategy) - report.expected_loss, lam=lam, measure="loss"
        )
        tally.observe(
            report.expected_utility - bench.prophet / (lam + 2.0),
            lam=lam,
            measure="utility",
        )


def _two_point_orderings(bench: _Workbench, lambdas, tally: _Tally) -> None:
    for lam in lambdas:
        instance = bench.instance.with_lambda(lam)
        first, second = two_point_orderings(instance, bench.settings)
        best = max(first.expected_value, second.expected_value)
        optimum = best_ordering_exhaustive(instance, bench.settings).expected_value
        tally.observe(best - bench.prophet / 2.0, lam=lam, measure="half_prophet")
        tally.observe(optimum - best, lam=lam, measure="exhaustive")


_CHECKS = {
    PropertyId.P1: _reference_monotone,
    PropertyId.P2: _utility_lambda_monotone,
    PropertyId.P3: _patience,
    PropertyId.P4: _value_lambda_monotone,
    PropertyId.P5: _append,
    PropertyId.P6: _prepend,
    PropertyId.P7: _prophet_bound,
    PropertyId.P8: _unbiased_bound,
    PropertyId.P9: _random_order_bound(use_rho=False),
    PropertyId.P10: _random_order_bound(use_rho=True),
    PropertyId.P11: _calibrated_threshold,
    PropertyId.P12: _two_point_orderings,
}


def _require(condition: bool, property_id: PropertyId, reason: str) -> None:
    if not condition:
        raise PropertyPreconditionViolated(f"{property_id.value}: {reason}")


def applicable_lambdas(
    property_id: PropertyId, instance: Instance, lambdas: Sequence[float]
) -> List[float]:
    """Loss aversion values the property is checked at, after its preconditions.

    Raises:
        PropertyPreconditionViolated: If the instance or the lambdas do not qualify.
    """
    lambdas = sorted(set(float(lam) for lam in lambdas))
    _require(bool(lambdas), property_id, "no lambda values given")

    if property_id in (PropertyId.P2, PropertyId.P3, PropertyId.P4):
        _require(len(lambdas) >= 2, property_id, "needs two distinct lambda values")
    if property_id in (PropertyId.P5, PropertyId.P6):
        _require(instance.n >= 2, property_id, "needs at least two candidates")
    if property_id not in (
        PropertyId.P1,
        PropertyId.P2,
        PropertyId.P3,
        PropertyId.P4,
        PropertyId.P5,
    ):
        _require(
            instance.initial_reference == 0.0,
            property_id,
            "holds for an initial reference of 0",
        )
    if property_id in (PropertyId.P9, PropertyId.P10):
        identical = all(c == instance.candidates[0] for c in instance.candidates)
        _require(
            identical or instance.n <= EXACT_MAX_CANDIDATES,
            property_id,
            f"exact random order allows at most {EXACT_MAX_CANDIDATES} candidates",
        )
    if property_id is PropertyId.P12:
        _require(
            all(c.support_size <= 2 for c in instance.candidates),
            property_id,
            "every candidate must be 2-point",
        )
        _require(
            instance.n <= EXHAUSTIVE_MAX_CANDIDATES,
            property_id,
            f"exhaustive search allows at most {EXHAUSTIVE_MAX_CANDIDATES} candidates",
        )
        lambdas = [lam for lam in lambdas if lam > 0]
        _require(bool(lambdas), property_id, "needs a positive lambda")
    return lambdas


def check(
    property_id: PropertyId,
    instance: Instance,
    lambdas: Sequence[float],
    tol: float = DEFAULT_TOLERANCE,
    settings: Optional[SolverSettings] = None,
    label: str = "",
    bench: Optional[_Workbench] = None,
) -> PropertyVerdict:
    """Check one property on one candidate sequence at the given loss aversions.

    The instance's own lambda is ignored; only ``lambdas`` are used.

    Raises:
        PropertyPreconditionViolated: If the property does not apply.
    """
    lambdas = applicable_lambdas(property_id, instance, lambdas)
    bench = bench or _Workbench(instance, settings or SolverSettings())
    tally = _Tally(tol)
    _CHECKS[property_id](bench, lambdas, tally)
    return tally.finish(property_id, instance, lambdas, label)


def check_all(
    instance: Instance,
    lambdas: Sequence[float],
    tol: float = DEFAULT_TOLERANCE,
    settings: Optional[SolverSettings] = None,
    label: str = "",
) -> List[PropertyVerdict]:
    """Every applicable property on one instance, sharing solved tables."""
    bench = _Workbench(instance, settings or SolverSettings())
    verdicts = []
    for property_id in PropertyId:
        try:
            verdicts.append(
                check(property_id, instance, lambdas, tol, label=label, bench=bench)
            )
        except PropertyPreconditionViolated as error:
            logger.debug("skipping %s", error)
    return verdicts


def run_suite(
    config: Optional[GeneratorConfig] = None,
    tol: float = DEFAULT_TOLERANCE,
    settings: Optional[SolverSettings] = None,
    curated: bool = False,
    workers: int = 1,
) -> List[PropertyVerdict]:
    """Check all applicable properties on generated or curated instances.

    Curated instances are checked at ``config.lambdas`` plus their own lambda.
    Verdicts come back in instance order, then property order.
    """
    config = config or GeneratorConfig()
    if not config.lambdas:
        return []

    if curated:
        jobs = [
            (label, instance, list(config.lambdas) + [instance.lam])
            for label, instance in curated_instances()
        ]
    else:
        jobs = [
            (f"generated-{k}", instance, config.lambdas)
            for k, instance in enumerate(generate_instances(config))
        ]

    def run(job) -> List[PropertyVerdict]:
        label, instance, lambdas = job
        return check_all(instance, lambdas, tol, settings, label)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        batches = list(pool.map(run, jobs))

    verdicts = [verdict for batch in batches for verdict in batch]
    failures = sum(not verdict.passed for verdict in verdicts)
    logger.info("checked %d verdicts, %d failed", len(verdicts), failures)
    return verdicts
