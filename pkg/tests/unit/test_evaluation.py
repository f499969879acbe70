from __future__ import annotations

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmeval.core import (
    CostModel,
    LifecycleOutcome,
    PredictionTrace,
    ReplacementKind,
    TimeGrid,
    UnitTruth,
)
from pdmeval.errors import DomainError, InputError
from pdmeval.evaluation import (
    CiMethod,
    FleetEvaluation,
    Setting,
    bootstrap_metric_interval,
    bootstrap_ratio_variance,
    evaluate_setting,
    metric,
    metric_convergence,
    metric_values,
    perfect_fleet,
    renewal_ratio,
    renewal_ratio_variance,
)
from pdmeval.policies import (
    HeuristicPolicy,
    OpportunityLossPolicy,
    OrderingPolicyParams,
    Policy1Params,
    RbarOption,
    RenewalPolicy,
    ReplacementPolicy,
    fit_population,
    rbar_estimate,
    run_fleet,
)
from pdmeval.simulator import SimulatorConfig, perfect_traces, sample_fleet

Fleet = tuple[list[UnitTruth], list[PredictionTrace]]


def _outcomes(pairs: list[tuple[float, float]], prefix: str = "u") -> list[LifecycleOutcome]:
    return [
        LifecycleOutcome(
            unit_id=f"{prefix}{index:03d}",
            t_lc=length,
            replacement_kind=ReplacementKind.PREVENTIVE,
            c_rep=cost,
        )
        for index, (cost, length) in enumerate(pairs)
    ]


def _random_outcomes(n: int, seed: int, failure_share: float = 0.3) -> list[LifecycleOutcome]:
    rng = np.random.default_rng(seed)
    lengths = rng.uniform(100.0, 300.0, size=n)
    costs = np.where(rng.random(n) < failure_share, 100.0, 10.0)
    return _outcomes(list(zip(costs.tolist(), lengths.tolist())))


def test_renewal_ratio_divides_mean_cost_by_mean_length() -> None:
    outcomes = _outcomes([(10.0, 100.0), (100.0, 50.0)])
    assert renewal_ratio(outcomes) == pytest.approx(55.0 / 75.0)


def test_renewal_ratio_rejects_empty_and_zero_length() -> None:
    with pytest.raises(InputError):
        renewal_ratio([])
    with pytest.raises(DomainError):
        renewal_ratio(_outcomes([(10.0, 0.0)]))
    with pytest.raises(InputError):
        renewal_ratio_variance(_outcomes([(10.0, 100.0)]))


pairs_strategy = st.lists(
    st.tuples(
        st.floats(min_value=1.0, max_value=1000.0),
        st.floats(min_value=1.0, max_value=500.0),
    ),
    min_size=2,
    max_size=30,
)


@settings(max_examples=200, deadline=None)
@given(pairs=pairs_strategy)
def test_delta_variance_matches_gradient_form(pairs: list[tuple[float, float]]) -> None:
    data = np.asarray(pairs, dtype=np.float64)
    n = data.shape[0]
    mean_c, mean_t = data.mean(axis=0)
    gradient = np.array([1.0 / mean_t, -mean_c / mean_t**2])
    covariance = np.cov(data.T, ddof=1)
    oracle = max(float(gradient @ covariance @ gradient) / n, 0.0)
    scale = (covariance[0, 0] / mean_t**2 + mean_c**2 * covariance[1, 1] / mean_t**4) / n
    value = renewal_ratio_variance(_outcomes(pairs))
    assert value >= 0.0
    assert value == pytest.approx(oracle, rel=1e-9, abs=1e-9 * scale + 1e-300)


def test_metric_of_identical_outcomes_is_zero() -> None:
    outcomes = _random_outcomes(50, seed=1)
    evaluation = metric(outcomes, outcomes)
    assert evaluation.m_hat == 0.0
    assert evaluation.r_hat == evaluation.r_perfect
    assert evaluation.var_r_hat is not None
    assert evaluation.var_m_hat == pytest.approx(evaluation.var_r_hat / evaluation.r_perfect**2)
    assert evaluation.ci95_m is not None
    low, high = evaluation.ci95_m
    assert low == pytest.approx(-high)
    assert high == pytest.approx(1.96 * evaluation.var_m_hat**0.5)


def test_single_unit_metric_has_no_variance() -> None:
    policy = _outcomes([(100.0, 120.0)])
    perfect = _outcomes([(10.0, 110.0)])
    evaluation = metric(policy, perfect)
    assert evaluation.m_hat == pytest.approx((100.0 / 120.0 - 10.0 / 110.0) / (10.0 / 110.0))
    assert evaluation.var_r_hat is None
    assert evaluation.var_m_hat is None
    assert evaluation.ci95_m is None


def test_metric_requires_matching_units() -> None:
    policy = _outcomes([(10.0, 100.0), (100.0, 90.0)])
    with pytest.raises(InputError, match="different units"):
        metric(policy, _outcomes([(10.0, 100.0), (10.0, 90.0)], prefix="v"))
    with pytest.raises(InputError, match="duplicate"):
        metric(policy + policy[:1], policy)


def test_metric_pairs_outcomes_by_unit_id() -> None:
    policy = _outcomes([(10.0, 100.0), (100.0, 90.0), (10.0, 80.0)])
    perfect = _outcomes([(10.0, 95.0), (10.0, 85.0), (10.0, 75.0)])
    forward = metric(policy, perfect)
    shuffled = metric(policy[::-1], perfect)
    assert shuffled.m_hat == forward.m_hat
    assert [outcome.unit_id for outcome in shuffled.outcomes] == ["u000", "u001", "u002"]


def test_bootstrap_interval_is_seeded_and_covers_estimate() -> None:
    policy = _random_outcomes(80, seed=2, failure_share=0.4)
    perfect = _random_outcomes(80, seed=3, failure_share=0.0)
    first = bootstrap_metric_interval(policy, perfect, n_resamples=2000, seed=5)
    second = bootstrap_metric_interval(policy, perfect, n_resamples=2000, seed=5)
    assert first == second
    m_hat = metric(policy, perfect).m_hat
    assert first[0] < m_hat < first[1]


def test_metric_uses_bootstrap_interval_on_request() -> None:
    policy = _random_outcomes(30, seed=4, failure_share=0.4)
    perfect = _random_outcomes(30, seed=6, failure_share=0.0)
    evaluation = metric(policy, perfect, ci_method=CiMethod.BOOTSTRAP, n_resamples=500, seed=9)
    assert evaluation.ci_method is CiMethod.BOOTSTRAP
    assert evaluation.ci95_m == bootstrap_metric_interval(policy, perfect, n_resamples=500, seed=9)
    assert evaluation.var_m_hat is not None


def test_bootstrap_ratio_variance_needs_resamples() -> None:
    with pytest.raises(DomainError):
        bootstrap_ratio_variance(_random_outcomes(5, seed=0), n_resamples=1)


def test_metric_values_matches_metric_per_column() -> None:
    policy = _random_outcomes(20, seed=10, failure_share=0.5)
    other = _random_outcomes(20, seed=11, failure_share=0.1)
    perfect = _random_outcomes(20, seed=12, failure_share=0.0)
    c_m = np.column_stack([[o.c_m for o in policy], [o.c_m for o in other]])
    t_lc = np.column_stack([[o.t_lc for o in policy], [o.t_lc for o in other]])
    r_perfect = renewal_ratio(perfect)
    values = metric_values(c_m, t_lc, r_perfect)
    assert values[0] == pytest.approx(metric(policy, perfect).m_hat, rel=1e-12)
    assert values[1] == pytest.approx(metric(other, perfect).m_hat, rel=1e-12)


def test_convergence_spread_shrinks_with_fleet_size() -> None:
    policy = _random_outcomes(200, seed=13, failure_share=0.4)
    perfect = _random_outcomes(200, seed=14, failure_share=0.0)
    small, large = metric_convergence(policy, perfect, sizes=[10, 150], n_repeats=200, seed=1)
    assert (small.n_units, large.n_units) == (10, 150)
    assert large.m_hat_std < small.m_hat_std
    assert large.delta_std < small.delta_std
    with pytest.raises(DomainError):
        metric_convergence(policy, perfect, sizes=[1])


def test_perfect_fleet_excludes_infeasible_ordering_units(
    ordering_costs: CostModel,
    caplog: pytest.LogCaptureFixture,
) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=30)
    truths = [UnitTruth("b", 185.0), UnitTruth("a", 15.0)]
    with caplog.at_level(logging.WARNING, logger="pdmeval.evaluation"):
        outcomes, excluded = perfect_fleet(truths, grid, ordering_costs, Setting.ORDERING)
    assert excluded == ("a",)
    assert [outcome.unit_id for outcome in outcomes] == ["b"]
    assert "unit a" in caplog.text
    replacement, none_excluded = perfect_fleet(truths, grid, ordering_costs, Setting.REPLACEMENT)
    assert none_excluded == ()
    assert [outcome.t_lc for outcome in replacement] == [10.0, 180.0]


def test_point_mass_predictions_match_perfect_replacement(
    perfect_fleet_traces: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = perfect_fleet_traces
    evaluation = evaluate_setting(
        traces,
        truths,
        sim_config_grid,
        costs,
        Setting.REPLACEMENT,
        policy=HeuristicPolicy(Policy1Params(0.5)),
    )
    assert evaluation.m_hat == pytest.approx(0.0, abs=1e-12)
    assert evaluation.preventive_share == 1.0
    assert evaluation.n_units == len(truths)


def test_point_mass_predictions_match_perfect_ordering(
    perfect_fleet_traces: Fleet,
    sim_config_grid: TimeGrid,
    ordering_costs: CostModel,
) -> None:
    truths, traces = perfect_fleet_traces
    evaluation = evaluate_setting(
        traces,
        truths,
        sim_config_grid,
        ordering_costs,
        Setting.ORDERING,
        ordering=OrderingPolicyParams(0.5, 0.5),
    )
    assert evaluation.m_hat == pytest.approx(0.0, abs=1e-12)
    assert all(outcome.c_delay == 0.0 for outcome in evaluation.outcomes)
    assert all(outcome.c_stock == 0.0 for outcome in evaluation.outcomes)


def test_evaluate_setting_excludes_infeasible_units(ordering_costs: CostModel) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=30)
    truths = [UnitTruth("a", 15.0), UnitTruth("b", 185.0), UnitTruth("c", 200.0)]
    evaluation = evaluate_setting(
        perfect_traces(truths, grid),
        truths,
        grid,
        ordering_costs,
        Setting.ORDERING,
        ordering=OrderingPolicyParams(0.5, 0.5),
    )
    assert evaluation.excluded_units == ("a",)
    assert evaluation.n_units == 2
    assert evaluation.summary()["excluded_units"] == ["a"]


def test_evaluate_setting_needs_a_policy(fleet: Fleet, grid: TimeGrid, costs: CostModel) -> None:
    truths, traces = fleet
    with pytest.raises(DomainError, match="replacement policy"):
        evaluate_setting(traces, truths, grid, costs, Setting.REPLACEMENT)
    with pytest.raises(InputError):
        evaluate_setting(traces[1:], truths, grid, costs, Setting.REPLACEMENT)


def test_fleet_evaluation_survives_serialization(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    evaluation = evaluate_setting(
        traces,
        truths,
        sim_config_grid,
        costs,
        Setting.REPLACEMENT,
        policy=HeuristicPolicy(Policy1Params(0.1)),
    )
    restored = FleetEvaluation.from_dict(evaluation.to_dict())
    assert restored.summary() == evaluation.summary()
    assert restored.outcomes == evaluation.outcomes


def test_noisy_predictions_cost_more_than_perfect(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    policy = HeuristicPolicy(Policy1Params(0.1))
    outcomes = run_fleet(traces, truths, sim_config_grid, costs, policy)
    perfect, _ = perfect_fleet(truths, sim_config_grid, costs, Setting.REPLACEMENT)
    assert metric(outcomes, perfect).m_hat > 0


@pytest.mark.slow
def test_bootstrap_variance_agrees_with_delta_method() -> None:
    outcomes = _random_outcomes(1000, seed=21, failure_share=0.3)
    delta = renewal_ratio_variance(outcomes)
    bootstrap = bootstrap_ratio_variance(outcomes, n_resamples=10_000, seed=3)
    assert 1 / 1.5 < bootstrap / delta < 1.5


def test_delta_variance_matches_hand_computation() -> None:
    outcomes = _outcomes([(100.0, 50.0), (1000.0, 100.0)])
    expected = (405000 / 75**2 - 2 * 550 * 22500 / 75**3 + 550**2 * 1250 / 75**4) / 2
    assert renewal_ratio_variance(outcomes) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    lengths=st.lists(st.floats(min_value=1.0, max_value=500.0), min_size=2, max_size=40),
    alpha=st.floats(min_value=0.01, max_value=100.0),
)
def test_proportional_costs_have_no_ratio_variance(lengths: list[float], alpha: float) -> None:
    outcomes = _outcomes([(alpha * length, length) for length in lengths])
    ratio = renewal_ratio(outcomes)
    assert renewal_ratio_variance(outcomes) <= 1e-12 * ratio**2 / len(lengths) + 1e-300


@settings(max_examples=200, deadline=None)
@given(
    pairs=pairs_strategy,
    cost_scale=st.floats(min_value=0.01, max_value=100.0),
    time_scale=st.floats(min_value=0.01, max_value=100.0),
)
def test_metric_ignores_currency_and_time_units(
    pairs: list[tuple[float, float]],
    cost_scale: float,
    time_scale: float,
) -> None:
    policy = _outcomes(pairs)
    perfect = _outcomes([(cost * 0.5, length * 1.1) for cost, length in pairs])
    scaled_policy = _outcomes([(cost * cost_scale, length * time_scale) for cost, length in pairs])
    scaled_perfect = _outcomes(
        [(cost * 0.5 * cost_scale, length * 1.1 * time_scale) for cost, length in pairs],
    )
    base = metric(policy, perfect)
    scaled = metric(scaled_policy, scaled_perfect)
    assert scaled.m_hat == pytest.approx(base.m_hat, rel=1e-9, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    sigma_ln_eps=st.floats(min_value=0.05, max_value=1.0),
    ratio=st.floats(min_value=0.02, max_value=0.5),
    p_thres=st.floats(min_value=0.01, max_value=0.99),
)
def test_no_policy_beats_perfect_predictions(
    seed: int,
    sigma_ln_eps: float,
    ratio: float,
    p_thres: float,
) -> None:
    config = SimulatorConfig(
        mu_tf=225.0,
        sigma_tf=40.0,
        grid=TimeGrid.covering(10.0, 225.0 + 6 * 40.0),
        sigma_ln_eps=sigma_ln_eps,
        corr_length=50.0,
        n_units=8,
        seed=seed,
    )
    truths, traces = sample_fleet(config)
    costs = CostModel(c_p=10.0, c_c=10.0 / ratio)
    population = fit_population(truths)
    policies: list[ReplacementPolicy] = [
        HeuristicPolicy(Policy1Params(p_thres)),
        HeuristicPolicy(Policy1Params(ratio)),
        RenewalPolicy(),
    ]
    policies += [
        OpportunityLossPolicy(rbar_estimate(population, costs, option)) for option in RbarOption
    ]
    for policy in policies:
        evaluation = evaluate_setting(
            traces,
            truths,
            config.grid,
            costs,
            Setting.REPLACEMENT,
            policy=policy,
        )
        assert evaluation.m_hat >= -1e-12, policy
