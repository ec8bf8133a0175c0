import itertools
import math

import pytest
from pydantic import ValidationError

from Objects import scenarios
from Objects.distributions import Instance, make_distribution, point_mass
from Objects.errors import (
    ExactModeTooLarge,
    InvalidLambda,
    NotTwoPoint,
    TooManyCandidates,
)
from Utilities.dp_solver import solve
from Utilities.evaluator import (
    evaluate_policy,
    prophet_value,
    threshold_selection_probability,
)
from Utilities.order_lab import (
    RandomOrderMode,
    RandomOrderSolver,
    _monte_carlo,
    best_ordering_exhaustive,
    evaluate_arrival_order,
    random_order_bounds,
    random_order_estimate,
    random_order_selection_probability,
    random_order_threshold_value,
    random_order_value,
    solve_rho,
    two_point_order_permutations,
    two_point_orderings,
)
from Utilities.properties import GeneratorConfig, generate_instances


@pytest.fixture
def four_candidates(mixed_instance) -> Instance:
    return Instance(
        candidates=mixed_instance.candidates + (point_mass(1.25),),
        lam=mixed_instance.lam,
    )


def test_rho_without_loss_aversion():
    solution = solve_rho(0.0)
    assert solution.rho == pytest.approx(math.e / (math.e - 1.0), abs=1e-10)
    assert abs(solution.residual) <= 1e-12


@pytest.mark.parametrize("lam", [0.5, 1.0, 10.0, 1e3, 1e6])
def test_rho_exceeds_log_of_lambda(lam):
    solution = solve_rho(lam)
    assert abs(solution.residual) <= 1e-12
    assert solution.rho > math.log1p(lam)


def test_rho_approaches_log_lambda():
    gap_small = abs(solve_rho(1e3).rho - math.log(1e3))
    gap_large = abs(solve_rho(1e6).rho - math.log(1e6))
    assert gap_large < gap_small
    assert gap_large < 0.15


def test_rho_rejects_negative_lambda():
    with pytest.raises(InvalidLambda):
        solve_rho(-1.0)


def test_identical_candidates_use_the_fixed_order_solution(three_coins):
    estimate = random_order_estimate(three_coins)
    report = evaluate_policy(three_coins, solve(three_coins))
    assert estimate.value == pytest.approx(report.expected_value)
    assert estimate.kind == "exact"

    utility, value, _ = RandomOrderSolver(three_coins).root()
    assert utility == pytest.approx(report.expected_utility)
    assert value == pytest.approx(report.expected_value)


@pytest.mark.parametrize("n", [3, 4])
def test_remaining_set_recursion_on_identical_candidates(n):
    instance = scenarios.iid_n(n)
    _, value, _ = RandomOrderSolver(instance).root()
    fixed = evaluate_policy(instance, solve(instance))
    assert value == pytest.approx(scenarios.iid_n_closed_form(n), abs=1e-9)
    assert value == pytest.approx(fixed.expected_value, abs=1e-9)


def test_recursion_averages_the_arrival_orders(mixed_instance):
    solver = RandomOrderSolver(mixed_instance)
    utility, value, _ = solver.root()
    orders = [
        evaluate_arrival_order(solver, permutation)
        for permutation in itertools.permutations(range(mixed_instance.n))
    ]
    assert value == pytest.approx(math.fsum(v for v, _ in orders) / len(orders))
    assert utility == pytest.approx(math.fsum(u for _, u in orders) / len(orders))
    assert len(solver.orders) == 6


def test_random_order_value_respects_bounds(mixed_instance, example1_instance):
    for instance in (mixed_instance, example1_instance):
        value = random_order_value(instance)
        assert prophet_value(instance) / value <= instance.n + 1e-9
        assert prophet_value(instance) / value <= solve_rho(instance.lam).rho + 1e-9


def test_exact_mode_cap():
    instance = Instance(candidates=tuple(point_mass(float(v)) for v in range(1, 12)))
    with pytest.raises(ExactModeTooLarge):
        random_order_estimate(instance)


def test_exact_mode_cap_skips_identical_candidates():
    coin = make_distribution([(1.0, 0.5), (0.0, 0.5)])
    estimate = random_order_estimate(Instance(candidates=(coin,) * 12, lam=1.0))
    assert estimate.value == pytest.approx(1.0 - 0.5**12)


def test_monte_carlo_requires_a_seed():
    with pytest.raises(ValidationError):
        RandomOrderMode(kind="mc")


def test_monte_carlo_matches_exact(four_candidates):
    exact = random_order_estimate(four_candidates)
    mode = RandomOrderMode(kind="mc", samples=20_000, seed=7, workers=2)
    estimate = random_order_estimate(four_candidates, mode)
    assert estimate.samples == 20_000
    assert estimate.kind == "mc"
    assert abs(estimate.value - exact.value) <= 4 * estimate.standard_error + 1e-12
    assert abs(estimate.utility - exact.utility) <= (
        4 * estimate.utility_standard_error + 1e-12
    )


def test_monte_carlo_is_reproducible(four_candidates):
    mode = RandomOrderMode(kind="mc", samples=500, seed=11, workers=3)
    first = random_order_estimate(four_candidates, mode)
    second = random_order_estimate(four_candidates, mode)
    assert first == second


def test_monte_carlo_workers_keep_their_own_memo(four_candidates):
    shared = RandomOrderSolver(four_candidates)
    mode = RandomOrderMode(kind="mc", samples=60, seed=5, workers=3)
    estimate = _monte_carlo(shared, mode)
    assert estimate.samples == 60
    assert shared.orders == {}


def test_selection_probability_averages_the_last_arrival(mixed_instance):
    theta, q = 1.0, 0.4
    orders = list(itertools.permutations(range(mixed_instance.n)))
    average = math.fsum(
        threshold_selection_probability(mixed_instance.reordered(p), theta, q)
        for p in orders
    ) / len(orders)
    assert random_order_selection_probability(mixed_instance, theta, q) == (
        pytest.approx(average, abs=1e-12)
    )


def test_random_order_threshold(example1_instance):
    strategy, estimate = random_order_threshold_value(example1_instance)
    rho = solve_rho(example1_instance.lam).rho
    assert strategy.alpha == pytest.approx(1.0 - (1.0 - 1.0 / rho) / 2.0)
    assert strategy.selection_probability <= 1.0
    assert estimate.value > 0.0
    assert estimate.utility <= random_order_estimate(example1_instance).utility + 1e-12


def test_two_point_order_permutations(two_point_instance):
    first, second = two_point_order_permutations(two_point_instance)
    assert first == [0, 1, 2]
    assert second == [0, 2, 1]


def test_two_point_orderings_are_labelled(two_point_instance):
    first, second = two_point_orderings(two_point_instance)
    assert (first.label, second.label) == ("ordering1", "ordering2")
    assert first.permutation == (0, 1, 2)
    assert second.to_row()["permutation"] == "0 2 1"

    better = max(first.expected_value, second.expected_value)
    assert best_ordering_exhaustive(two_point_instance).expected_value >= better - 1e-12
    assert 2.0 * better >= prophet_value(two_point_instance)


def test_two_point_orderings_need_two_point_candidates(mixed_instance):
    with pytest.raises(NotTwoPoint):
        two_point_orderings(mixed_instance)


@pytest.mark.parametrize("epsilon", [0.1, 0.05])
def test_tight_two_point_instance(epsilon):
    instance = scenarios.two_point_tight(epsilon)
    expected = scenarios.two_point_tight_value(epsilon)
    first, second = two_point_orderings(instance)
    assert first.expected_value == pytest.approx(expected, rel=1e-9)
    assert second.expected_value == pytest.approx(expected, rel=1e-9)
    assert best_ordering_exhaustive(instance).expected_value == pytest.approx(
        expected, rel=1e-9
    )
    assert prophet_value(instance) / expected < 2.0


def test_tight_two_point_prophet():
    assert prophet_value(scenarios.two_point_tight(0.1)) == pytest.approx(0.197209)


def test_tight_two_point_ratio_grows_as_epsilon_shrinks():
    ratios = []
    for epsilon in (0.1, 0.05):
        instance = scenarios.two_point_tight(epsilon)
        best = best_ordering_exhaustive(instance).expected_value
        ratios.append(prophet_value(instance) / best)
    assert ratios[0] == pytest.approx(0.197209 / 0.109)
    assert ratios[0] < ratios[1] < 2.0


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.5, 1.0, 5.0, 100.0])
def test_two_point_orderings_on_generated_instances(lam):
    config = GeneratorConfig(
        count=100, seed=17, n_max=6, support_min=2, support_max=2, lambdas=[lam]
    )
    for instance in generate_instances(config):
        instance = instance.with_lambda(lam)
        better = max(r.expected_value for r in two_point_orderings(instance))
        assert better >= prophet_value(instance) / 2.0 - 1e-9
        assert better <= best_ordering_exhaustive(instance).expected_value + 1e-9


def test_exhaustive_search_cap():
    instance = Instance(candidates=tuple(point_mass(float(v)) for v in range(9)))
    with pytest.raises(TooManyCandidates):
        best_ordering_exhaustive(instance)


def test_exhaustive_search_prefers_the_earliest_order():
    instance = Instance(candidates=(point_mass(1.0), point_mass(1.0)))
    assert best_ordering_exhaustive(instance).permutation == (0, 1)


def test_random_order_bounds(example1_instance):
    bounds = random_order_bounds(example1_instance)
    assert bounds["bound_n"] == 2.0
    assert bounds["prophet_value"] == pytest.approx(28.0 / 19.0)
    assert bounds["bound_rho"] == pytest.approx(solve_rho(1.0).rho)
