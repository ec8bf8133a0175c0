import pytest

from Objects import scenarios
from Objects.distributions import Instance, make_distribution, point_mass
from Objects.errors import (
    AlphaOutOfRange,
    DivisionByZeroValue,
    InstanceTooLarge,
    TableInstanceMismatch,
)
from Utilities.dp_solver import solve
from Utilities.evaluator import (
    EvaluatorSettings,
    brute_force_optimal,
    calibrate_threshold,
    evaluate_policy,
    evaluate_threshold,
    loss_bound,
    prophet_value,
    ratio,
    ratio_report,
    stop_probability_sum,
    threshold_selection_probability,
)


def test_report_of_the_biased_agent(sec41_instance):
    report = evaluate_policy(sec41_instance, solve(sec41_instance))
    assert report.expected_value == pytest.approx(1.0)
    assert report.expected_loss == pytest.approx(0.0)
    assert report.expected_utility == pytest.approx(1.0)
    assert report.stop_time_distribution == [(1, 1.0), (2, 0.0)]
    assert report.value_distribution == [(1.0, 1.0)]


def test_report_of_the_rational_agent():
    instance = scenarios.sec41(0.0)
    report = evaluate_policy(instance, solve(instance))
    assert report.stop_time_distribution == [(1, 0.0), (2, 1.0)]
    assert report.value_distribution == [(0.0, 0.5), (3.0, 0.5)]
    assert report.probability_selected_above(1.0, strict=True) == pytest.approx(0.5)


def test_stop_time_distribution_sums_to_one(three_coins, mixed_instance):
    for instance in (three_coins, mixed_instance.with_lambda(4.0)):
        report = evaluate_policy(instance, solve(instance))
        assert stop_probability_sum(report) == pytest.approx(1.0, abs=1e-12)


def test_evaluate_policy_rejects_foreign_table(sec41_instance, example1_instance):
    with pytest.raises(TableInstanceMismatch):
        evaluate_policy(example1_instance, solve(sec41_instance))


def test_brute_force_cap(sec41_instance):
    with pytest.raises(InstanceTooLarge):
        brute_force_optimal(sec41_instance, EvaluatorSettings(brute_force_cap=1))


def test_brute_force_on_sec41(sec41_instance):
    report = brute_force_optimal(sec41_instance)
    assert report.expected_value == pytest.approx(1.0)
    assert report.stop_time_distribution == [(1, 1.0)]


def test_prophet_value(example1_instance, three_coins):
    assert prophet_value(example1_instance) == pytest.approx(28.0 / 19.0)
    assert prophet_value(three_coins) == pytest.approx(7.0 / 8.0)


def test_ratio_conventions():
    assert ratio(0.0, 0.0) == 1.0
    assert ratio(3.0, 2.0) == 1.5
    with pytest.raises(DivisionByZeroValue):
        ratio(1.0, 0.0)


@pytest.mark.parametrize("lam, epsilon", [(1.0, 0.1), (5.0, 0.01), (0.5, 0.3)])
def test_example1_ratios_match_closed_forms(lam, epsilon):
    prophet, unbiased = ratio_report(scenarios.example1(lam, epsilon))
    expected_prophet, expected_unbiased = scenarios.example1_closed_forms(lam, epsilon)
    assert prophet == pytest.approx(expected_prophet, rel=1e-9)
    assert unbiased == pytest.approx(expected_unbiased, rel=1e-9)


def test_ratio_report_needs_a_positive_value():
    instance = Instance(candidates=(point_mass(0.0), point_mass(0.0)), lam=1.0)
    with pytest.raises(DivisionByZeroValue):
        ratio_report(instance)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_iid_agent_takes_the_first_nonzero_value(n):
    instance = scenarios.iid_n(n)
    report = evaluate_policy(instance, solve(instance))
    expected = scenarios.iid_n_closed_form(n)
    assert report.expected_value == pytest.approx(expected, rel=1e-9)


def test_calibrated_threshold_with_coin(example1_instance):
    strategy = calibrate_threshold(example1_instance, 2.0 / 3.0)
    assert strategy.theta == 1.0 / 1.9
    assert strategy.q == pytest.approx((2.0 / 3.0 - 0.1) / 0.9, abs=1e-12)
    assert strategy.selection_probability == pytest.approx(2.0 / 3.0, abs=1e-12)

    report = evaluate_threshold(example1_instance, strategy)
    assert report.probability_selected_above(strategy.theta, strict=False) == (
        pytest.approx(2.0 / 3.0, abs=1e-12)
    )
    assert report.expected_loss <= loss_bound(strategy) + 1e-12
    assert report.expected_utility == pytest.approx(1.0 / 1.9)
    assert report.expected_utility >= prophet_value(example1_instance) / 3.0


def test_calibration_without_tie_breaking():
    third = 1.0 / 3.0
    uniform = Instance(
        candidates=(make_distribution([(1.0, third), (2.0, third), (3.0, third)]),)
    )
    strategy = calibrate_threshold(uniform, 2.0 / 3.0)
    assert (strategy.theta, strategy.q) == (2.0, 0.0)
    assert strategy.selection_probability == pytest.approx(2.0 / 3.0)


def test_calibration_on_a_single_atom():
    strategy = calibrate_threshold(Instance(candidates=(point_mass(5.0),)), 0.3)
    assert (strategy.theta, strategy.q) == (5.0, 0.0)
    assert strategy.selection_probability == 1.0


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_calibration_rejects_alpha(example1_instance, alpha):
    with pytest.raises(AlphaOutOfRange):
        calibrate_threshold(example1_instance, alpha)


def test_selection_probability_in_closed_form(example1_instance):
    theta = 1.0 / 1.9
    assert threshold_selection_probability(example1_instance, theta, 0.0) == (
        pytest.approx(0.1)
    )
    assert threshold_selection_probability(example1_instance, theta, 1.0) == 1.0


def test_closed_form_agrees_with_forward_evaluation(mixed_instance):
    strategy = calibrate_threshold(mixed_instance, 0.5)
    report = evaluate_threshold(mixed_instance, strategy)
    assert report.probability_selected_above(strategy.theta, strict=False) == (
        pytest.approx(strategy.selection_probability, abs=1e-12)
    )
