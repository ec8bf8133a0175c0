import pytest
from pydantic import ValidationError

from Objects import scenarios
from Objects.distributions import Instance, make_distribution
from Objects.errors import PropertyPreconditionViolated
from Objects.objects import PropertyId
from Utilities.dp_solver import SolverSettings
from Utilities.properties import (
    GeneratorConfig,
    applicable_lambdas,
    check,
    check_all,
    curated_instances,
    generate_instances,
    run_suite,
)


def test_generator_is_deterministic():
    config = GeneratorConfig(count=10, seed=5)
    first = [i.digest for i in generate_instances(config)]
    second = [i.digest for i in generate_instances(config)]
    assert first == second
    reseeded = config.model_copy(update={"seed": 6})
    assert first != [i.digest for i in generate_instances(reseeded)]


def test_generated_instances_respect_the_config():
    config = GeneratorConfig(count=30, seed=1, n_min=2, n_max=3, support_max=2)
    for instance in generate_instances(config):
        assert 2 <= instance.n <= 3
        assert instance.lam == 0.0
        assert instance.initial_reference == 0.0
        for candidate in instance.candidates:
            assert 1 <= candidate.support_size <= 2
            assert all(v * 16 == int(v * 16) for v in candidate.values)


def test_generator_config_rejects_inverted_ranges():
    with pytest.raises(ValidationError):
        GeneratorConfig(n_min=4, n_max=2)
    with pytest.raises(ValidationError):
        GeneratorConfig(lambdas=[-1.0])


def test_curated_instances_are_labelled():
    labels = [label for label, _ in curated_instances()]
    assert labels[0] == "sec41"
    assert len(set(labels)) == len(labels)


@pytest.mark.parametrize("property_id", list(PropertyId))
def test_each_property_holds_on_example1(property_id, example1_instance):
    verdict = check(property_id, example1_instance, [0.0, 1.0, 3.0])
    assert verdict.passed, verdict.witness
    assert verdict.witness is None
    assert verdict.slack >= -1e-9


def test_prepend_slack_on_example1(example1_instance):
    verdict = check(PropertyId.P6, example1_instance, [1.0])
    assert verdict.slack == pytest.approx(1.0 / 1.9 - 1.0 / 2.0, abs=1e-9)


def test_two_point_property(two_point_instance):
    verdict = check(PropertyId.P12, two_point_instance, [0.0, 1.0, 4.0])
    assert verdict.passed
    assert verdict.lambdas == (1.0, 4.0)


def test_preconditions():
    single = Instance(candidates=(make_distribution([(1.0, 0.5), (2.0, 0.5)]),))
    with pytest.raises(PropertyPreconditionViolated):
        applicable_lambdas(PropertyId.P1, single, [])
    with pytest.raises(PropertyPreconditionViolated):
        applicable_lambdas(PropertyId.P3, single, [1.0])
    with pytest.raises(PropertyPreconditionViolated):
        applicable_lambdas(PropertyId.P5, single, [0.0, 1.0])
    with pytest.raises(PropertyPreconditionViolated):
        applicable_lambdas(PropertyId.P12, single, [0.0])
    assert applicable_lambdas(PropertyId.P2, single, [2.0, 0.0, 2.0]) == [0.0, 2.0]


def test_preconditions_need_zero_initial_reference(sec41_reference2):
    with pytest.raises(PropertyPreconditionViolated):
        check(PropertyId.P7, sec41_reference2, [0.0, 2.0])
    assert check(PropertyId.P1, sec41_reference2, [0.0, 2.0]).passed


def test_check_all_skips_inapplicable_properties(mixed_instance):
    verdicts = check_all(mixed_instance, [0.0, 1.0], label="mixed")
    checked = {v.property_id for v in verdicts}
    assert PropertyId.P12 not in checked
    assert PropertyId.P10 in checked
    assert all(v.label == "mixed" for v in verdicts)
    assert all(v.passed for v in verdicts)


def test_broken_decisions_are_caught():
    verdict = check(
        PropertyId.P4,
        scenarios.sec41(2.0),
        [0.0, 2.0],
        settings=SolverSettings(flip_first_decisions=True),
    )
    assert not verdict.passed
    assert verdict.witness["margin"] == pytest.approx(-0.5)
    assert verdict.slack == pytest.approx(-0.5)


def test_curated_suite_passes():
    verdicts = run_suite(GeneratorConfig(lambdas=[0.0, 1.0, 2.0]), curated=True)
    assert verdicts
    assert [v for v in verdicts if not v.passed] == []
    labels = {v.label for v in verdicts}
    assert {"sec41", "example1", "two_point_tight"} <= labels


def test_empty_lambda_list_yields_no_verdicts():
    assert run_suite(GeneratorConfig(lambdas=[], count=3)) == []


@pytest.mark.slow
def test_generated_instances_satisfy_every_property():
    verdicts = run_suite(GeneratorConfig(count=200, seed=42))
    assert {v.property_id for v in verdicts} == set(PropertyId)
    failures = [v.to_row() for v in verdicts if not v.passed]
    assert failures == []


def test_generated_two_point_instances_satisfy_the_ordering_bound():
    config = GeneratorConfig(
        count=12, seed=5, n_max=4, support_min=2, support_max=2, lambdas=[1.0, 5.0]
    )
    for instance in generate_instances(config):
        verdict = check(PropertyId.P12, instance, config.lambdas)
        assert verdict.passed, verdict.witness


def test_suite_runs_in_parallel():
    config = GeneratorConfig(count=6, seed=9, n_max=3, lambdas=[0.0, 1.0])
    serial = run_suite(config)
    parallel = run_suite(config, workers=3)
    assert [v.to_row() for v in serial] == [v.to_row() for v in parallel]
