"""Command-line entry point for the loss-averse stopping toolkit.

Subcommands:
  solve      optimal policy of a lambda-biased agent on an instance file
  reproduce  worked instances next to their closed forms
  verify     property suite over generated or curated instances
  order      random arrival order and chosen arrival orders
  rho        roots of the random-order bound equation

Exit status is 0 on success, 1 when a reproduction or verification mismatches and
2 on usage, input or parse errors.
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator

from Objects import scenarios
from Objects.distributions import Instance
from Objects.errors import StoppingError
from Utilities import properties
from Utilities.dp_solver import SolverSettings, solve, thresholds
from Utilities.evaluator import evaluate_policy, prophet_value, ratio, ratio_report
from Utilities.order_lab import (
    RandomOrderMode,
    best_ordering_exhaustive,
    random_order_estimate,
    random_order_threshold_value,
    solve_rho,
    two_point_orderings,
)
from Utilities.reporting import Report
from Utilities.utilities import Utilities

logger = logging.getLogger("lossaverse")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2
SCENARIOS = ("example1", "sec41", "iid_n", "two_point_tight", "rho_table")
DEFAULT_LAMBDAS = [0.0, 0.5, 1.0, 2.0, 5.0]
DEFAULT_RHO_LAMBDAS = [0.0, 1.0, 10.0, 100.0, 1e4, 1e6]
E_OVER_E_MINUS_ONE = math.e / (math.e - 1.0)

Row = Dict[str, Any]


class RunConfig(BaseModel):
    """Validated command-line inputs."""

    command: Literal["solve", "reproduce", "verify", "order", "rho"] = Field(
        title="Subcommand"
    )
    instance: List[Path] = Field(default_factory=list, title="Instance Files")
    lam: Optional[float] = Field(
        default=None,
        title="Loss Aversion",
        description="Overrides the lambda stored in instance files.",
    )
    lambdas: Optional[List[float]] = Field(default=None, title="Loss Aversion Sweep")
    epsilon: Optional[List[float]] = Field(default=None, title="Epsilon Values")
    n: Optional[int] = Field(default=None, title="Candidates", ge=1)
    tol: float = Field(
        default=1e-9,
        title="Tolerance",
        description="Allowed deviation from closed forms and inequalities.",
        gt=0.0,
    )
    output: Literal["json", "csv"] = Field(default="json", title="Output Format")
    out: Optional[Path] = Field(default=None, title="Output Path")
    dump_table: bool = Field(default=False, title="Dump Table")
    scenario: Optional[str] = None
    mode: Literal["exact", "mc"] = Field(default="exact", title="Random Order Mode")
    samples: int = Field(default=100_000, ge=2)
    seed: Optional[int] = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1, le=64)
    curated: bool = False
    count: Optional[int] = Field(default=None, ge=0)
    n_max: int = Field(default=4, ge=1, le=8)
    support_max: int = Field(default=3, ge=1)
    mutate: Optional[Literal["decide"]] = None
    pdf: Optional[Path] = None

    @model_validator(mode="after")
    def _seed_for_monte_carlo(self) -> "RunConfig":
        if self.mode == "mc" and self.seed is None:
            raise ValueError("--mode mc requires --seed.")
        return self


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", action="append", default=[], type=Path)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--lambdas", nargs="*", type=float)
    common.add_argument("--epsilon", nargs="+", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--output", choices=("json", "csv"), default="json")
    common.add_argument("--out", type=Path)
    common.add_argument("--dump-table", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="lossaverse", description="Optimal stopping for loss-averse agents."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("solve", parents=[common], help="solve instance files")

    reproduce = commands.add_parser(
        "reproduce", parents=[common], help="reproduce a worked instance"
    )
    reproduce.add_argument("scenario", choices=SCENARIOS)

    verify = commands.add_parser(
        "verify", parents=[common], help="run the property suite"
    )
    verify.add_argument("--curated", action="store_true")
    verify.add_argument("--count", type=int)
    verify.add_argument("--seed", type=int)
    verify.add_argument("--n-max", type=int, default=4)
    verify.add_argument("--support-max", type=int, default=3)
    verify.add_argument("--workers", type=int, default=1)
    verify.add_argument("--mutate", choices=("decide",))
    verify.add_argument("--pdf", type=Path)

    order = commands.add_parser(
        "order", parents=[common], help="arrival order analysis"
    )
    order.add_argument("--mode", choices=("exact", "mc"), default="exact")
    order.add_argument("--samples", type=int, default=100_000)
    order.add_argument("--seed", type=int)
    order.add_argument("--workers", type=int, default=1)

    commands.add_parser("rho", parents=[common], help="solve the rho equation")
    return parser


def _instances(config: RunConfig) -> List[Tuple[str, Instance]]:
    if not config.instance:
        raise UsageError(f"{config.command} needs at least one --instance file.")
    return [
        (str(path), Utilities.load_instance(path, config.lam))
        for path in config.instance
    ]


def _sweep(config: RunConfig, default: Sequence[float]) -> List[float]:
    if config.lambdas is not None:
        return list(config.lambdas)
    if config.lam is not None:
        return [config.lam]
    return list(default)


def cmd_solve(config: RunConfig) -> Tuple[List[Row], Dict[str, Any], bool]:
    rows: List[Row] = []
    for name, instance in _instances(config):
        table = solve(instance)
        report = evaluate_policy(instance, table)
        rows.append(
            {
                "section": "summary",
                "instance": name,
                "lambda": instance.lam,
                "initial_reference": instance.initial_reference,
                "root_utility": table.root_utility,
                **report.to_row(),
            }
        )
        rows.extend(
            {"section": "stop_time", "instance": name, "t": t, "probability": p}
            for t, p in report.stop_time_distribution
        )
        if config.dump_table:
            policy = thresholds(table)
            for t in range(1, instance.n + 1):
                for i, v in enumerate(table.grid.tolist()):
                    rows.append(
                        {
                            "section": "table",
                            "instance": name,
                            "t": t,
                            "reference": v,
                            "utility": float(table.utility[i, t - 1]),
                            "theta": float(policy.theta[i, t - 1]),
                        }
                    )
    return rows, {"lambda_override": config.lam}, True


def _reproduce_example1(config: RunConfig) -> Tuple[List[Row], bool]:
    rows, ok = [], True
    for lam in _sweep(config, [1.0]):
        for epsilon in config.epsilon or [0.1]:
            prophet, unbiased = ratio_report(scenarios.example1(lam, epsilon))
            closed = scenarios.example1_closed_forms(lam, epsilon)
            prophet_closed, unbiased_closed = closed
            match = (
                abs(prophet - prophet_closed) <= config.tol
                and abs(unbiased - unbiased_closed) <= config.tol
            )
            ok &= match
            rows.append(
                {
                    "lambda": lam,
                    "epsilon": epsilon,
                    "prophet_ratio": prophet,
                    "prophet_closed_form": prophet_closed,
                    "unbiased_ratio": unbiased,
                    "unbiased_closed_form": unbiased_closed,
                    "match": match,
                }
            )
    return rows, ok


def _reproduce_sec41(config: RunConfig) -> Tuple[List[Row], bool]:
    rows, ok = [], True
    for lam in _sweep(config, [0.0, 2.0]):
        for reference in (0.0, 2.0):
            instance = scenarios.sec41(lam, initial_reference=reference)
            report = evaluate_policy(instance, solve(instance))
            second = dict(report.stop_time_distribution).get(2, 0.0)
            if reference == 0.0:
                # Stopping on the sure 1 pays once 1 >= 1.5 - lam / 2.
                expected = 1.0 if lam >= 1.0 else 1.5
                match = abs(report.expected_value - expected) <= config.tol
            else:
                expected = 1.5
                match = abs(second - 1.0) <= config.tol
            ok &= match
            rows.append(
                {
                    "lambda": lam,
                    "initial_reference": reference,
                    "expected_value": report.expected_value,
                    "expected_value_closed_form": expected,
                    "probability_second_selected": second,
                    "match": match,
                }
            )
    return rows, ok


def _reproduce_iid_n(config: RunConfig) -> Tuple[List[Row], bool]:
    n = config.n or 3
    instance = scenarios.iid_n(n)
    estimate = random_order_estimate(instance)
    prophet = prophet_value(instance)
    closed = scenarios.iid_n_closed_form(n)
    match = abs(estimate.value - closed) <= config.tol
    row = {
        "n": n,
        "lambda": instance.lam,
        "prophet_value": prophet,
        "selected_value": estimate.value,
        "ratio": ratio(prophet, estimate.value),
        "closed_form": closed,
        "match": match,
    }
    return [row], match


def _reproduce_two_point_tight(config: RunConfig) -> Tuple[List[Row], bool]:
    rows, ok = [], True
    for epsilon in config.epsilon or [0.1, 0.05]:
        instance = scenarios.two_point_tight(epsilon)
        first, second = two_point_orderings(instance)
        best = best_ordering_exhaustive(instance)
        prophet = prophet_value(instance)
        closed = scenarios.two_point_tight_value(epsilon)
        observed = ratio(prophet, best.expected_value)
        match = abs(best.expected_value - closed) <= config.tol and observed < 2.0
        ok &= match
        rows.append(
            {
                "epsilon": epsilon,
                "lambda": instance.lam,
                "ordering1_value": first.expected_value,
                "ordering2_value": second.expected_value,
                "best_value": best.expected_value,
                "closed_form": closed,
                "prophet_value": prophet,
                "ratio": observed,
                "match": match,
            }
        )
    return rows, ok


def _rho_rows(lambdas: Sequence[float], tol: float) -> Tuple[List[Row], bool]:
    rows, ok = [], True
    for lam in lambdas:
        solution = solve_rho(lam)
        log_lambda = math.log(lam) if lam > 0 else None
        match = (
            abs(solution.residual) <= 1e-12
            and solution.rho > math.log1p(lam)
            and (
                lam != 0.0
                or abs(solution.rho - E_OVER_E_MINUS_ONE) <= min(tol, 1e-10)
            )
        )
        ok &= match
        rows.append(
            {
                "lambda": lam,
                "rho": solution.rho,
                "log_lambda": log_lambda,
                "gap": None if log_lambda is None else solution.rho - log_lambda,
                "residual": solution.residual,
                "match": match,
            }
        )
    return rows, ok


def cmd_reproduce(config: RunConfig) -> Tuple[List[Row], Dict[str, Any], bool]:
    if config.scenario == "example1":
        rows, ok = _reproduce_example1(config)
    elif config.scenario == "sec41":
        rows, ok = _reproduce_sec41(config)
    elif config.scenario == "iid_n":
        rows, ok = _reproduce_iid_n(config)
    elif config.scenario == "two_point_tight":
        rows, ok = _reproduce_two_point_tight(config)
    else:
        rows, ok = _rho_rows(_sweep(config, DEFAULT_RHO_LAMBDAS), config.tol)
    return rows, {"scenario": config.scenario, "tolerance": config.tol}, ok


def cmd_rho(config: RunConfig) -> Tuple[List[Row], Dict[str, Any], bool]:
    rows, ok = _rho_rows(_sweep(config, DEFAULT_RHO_LAMBDAS), config.tol)
    return rows, {"tolerance": config.tol}, ok


def cmd_verify(config: RunConfig) -> Tuple[List[Row], Dict[str, Any], bool]:
    if not config.curated and config.count is None:
        raise UsageError("verify needs --curated or a generator config (--count).")

    generator = properties.GeneratorConfig(
        n_max=config.n_max,
        support_max=config.support_max,
        lambdas=config.lambdas if config.lambdas is not None else DEFAULT_LAMBDAS,
        count=config.count if config.count is not None else 0,
        seed=config.seed if config.seed is not None else 42,
    )
    settings = SolverSettings(flip_first_decisions=config.mutate == "decide")
    verdicts = properties.run_suite(
        generator,
        tol=config.tol,
        settings=settings,
        curated=config.curated,
        workers=config.workers,
    )
    summary = Report.generate_summary(verdicts)
    rows = Report.rows_from_verdicts(verdicts)
    if config.pdf is not None:
        failures = [row for row in rows if not row["passed"]]
        Report.write_pdf(Report.generate_pdf(summary, failures), config.pdf)

    header = {
        "curated": config.curated,
        "count": generator.count,
        "seed": generator.seed,
        "lambdas": generator.lambdas,
        "mutate": config.mutate,
        **summary["values"],
    }
    return rows, header, summary["values"]["fail_count"] == 0


def cmd_order(config: RunConfig) -> Tuple[List[Row], Dict[str, Any], bool]:
    mode = RandomOrderMode(
        kind=config.mode,
        samples=config.samples,
        seed=config.seed,
        workers=config.workers,
    )
    rows: List[Row] = []
    for name, instance in _instances(config):
        prophet = prophet_value(instance)
        rho = solve_rho(instance.lam).rho
        estimate = random_order_estimate(instance, mode)
        rows.append(
            {
                "section": "random_order",
                "instance": name,
                "kind": estimate.kind,
                "expected_value": estimate.value,
                "expected_utility": estimate.utility,
                "standard_error": estimate.standard_error,
                "samples": estimate.samples,
                "prophet_value": prophet,
                "ratio": ratio(prophet, estimate.value),
                "bound_n": instance.n,
                "bound_rho": rho,
            }
        )
        if mode.kind == "mc":
            continue

        strategy, threshold = random_order_threshold_value(instance)
        rows.append(
            {
                "section": "random_order_threshold",
                "instance": name,
                "theta": strategy.theta,
                "q": strategy.q,
                "expected_value": threshold.value,
                "expected_utility": threshold.utility,
                "prophet_value": prophet,
                "utility_ratio": ratio(prophet, threshold.utility),
                "bound_rho": rho,
            }
        )
        if all(c.support_size <= 2 for c in instance.candidates):
            for result in two_point_orderings(instance):
                rows.append(
                    {
                        "section": "ordering",
                        "instance": name,
                        **result.to_row(),
                        "ratio": ratio(prophet, result.expected_value),
                        "bound_two_point": 2.0,
                    }
                )
        best = best_ordering_exhaustive(instance)
        rows.append(
            {
                "section": "ordering",
                "instance": name,
                **best.to_row(),
                "ratio": ratio(prophet, best.expected_value),
            }
        )
    header = {"lambda_override": config.lam, "mode": mode.kind, "seed": mode.seed}
    return rows, header, True


COMMANDS = {
    "solve": cmd_solve,
    "reproduce": cmd_reproduce,
    "verify": cmd_verify,
    "order": cmd_order,
    "rho": cmd_rho,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return int(error.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = RunConfig(**{k: v for k, v in vars(args).items() if k != "verbose"})
        rows, header, ok = COMMANDS[config.command](config)
    except (StoppingError, ValidationError, UsageError) as error:
        logger.error("%s: %s", type(error).__name__, error)
        return EXIT_USAGE

    Report.write(
        Report.render(rows, config.output, {"command": config.command, **header}),
        config.out,
    )
    if not ok:
        logger.error("%s reported a mismatch", config.command)
        return EXIT_MISMATCH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
