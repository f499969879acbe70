from __future__ import annotations

import logging

import pytest

from pdmeval.core import (
    CdfPoints,
    CostModel,
    PointMass,
    PredictionTrace,
    TimeGrid,
    UnitTruth,
    WeightedSamples,
)
from pdmeval.errors import ConfigError, InputError
from pdmeval.evaluation import Setting, evaluate_setting
from pdmeval.optimize import (
    DEFAULT_THRESHOLDS,
    CandidateScore,
    HyperparameterCandidate,
    SweepOptions,
    SweepPolicy,
    ThresholdGrid,
    best_candidate_index,
    cost_sweep,
    evaluate_sweep_policy,
    optimize_ordering_thresholds,
    optimize_policy1_threshold,
    score_candidates,
    select_hyperparameter_config,
)
from pdmeval.policies import HeuristicPolicy, OrderingPolicyParams, Policy1Params
from pdmeval.report import IssueCode
from pdmeval.simulator import SimulatorConfig, perfect_traces, sample_fleet

Fleet = tuple[list[UnitTruth], list[PredictionTrace]]

COARSE = ThresholdGrid((0.05, 0.2, 0.5, 0.8))


def test_default_threshold_grid() -> None:
    grid = ThresholdGrid()
    assert len(grid) == 99
    assert grid.values[0] == 0.01
    assert grid.values[-1] == 0.99
    assert grid.values == DEFAULT_THRESHOLDS
    assert ThresholdGrid.parse("0.01:0.99:0.01") == grid


@pytest.mark.parametrize("values", [(), (0.0, 0.5), (0.5, 1.0), (0.3, 0.2), (0.2, 0.2)])
def test_threshold_grid_rejects_bad_values(values: tuple[float, ...]) -> None:
    with pytest.raises(ConfigError):
        ThresholdGrid(values)


def test_point_mass_predictions_pick_smallest_threshold(
    perfect_fleet_traces: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = perfect_fleet_traces
    optimum = optimize_policy1_threshold(traces, truths, sim_config_grid, costs)
    assert optimum.p_thres == 0.01
    assert optimum.m_hat == pytest.approx(0.0, abs=1e-12)
    assert max(abs(value) for value in optimum.m_hat_by_threshold) < 1e-12


def test_threshold_search_matches_direct_evaluation(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    optimum = optimize_policy1_threshold(traces, truths, sim_config_grid, costs, COARSE)
    assert len(optimum.m_hat_by_threshold) == len(COARSE)
    for threshold, m_hat in zip(COARSE.values, optimum.m_hat_by_threshold):
        direct = evaluate_setting(
            traces,
            truths,
            sim_config_grid,
            costs,
            Setting.REPLACEMENT,
            policy=HeuristicPolicy(Policy1Params(threshold)),
        )
        assert m_hat == pytest.approx(direct.m_hat, rel=1e-9, abs=1e-12)
    assert optimum.m_hat == min(optimum.m_hat_by_threshold)


def test_tuned_threshold_is_no_worse_than_fixed_one(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    optimum = optimize_policy1_threshold(traces, truths, sim_config_grid, costs)
    fixed = evaluate_setting(
        traces,
        truths,
        sim_config_grid,
        costs,
        Setting.REPLACEMENT,
        policy=HeuristicPolicy(Policy1Params(0.1)),
    )
    assert optimum.m_hat <= fixed.m_hat + 1e-12


def test_threshold_search_needs_two_units(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    with pytest.raises(InputError):
        optimize_policy1_threshold(traces[:1], truths[:1], sim_config_grid, costs)


def test_ordering_search_on_point_masses(
    perfect_fleet_traces: Fleet,
    sim_config_grid: TimeGrid,
    ordering_costs: CostModel,
) -> None:
    truths, traces = perfect_fleet_traces
    optimum = optimize_ordering_thresholds(
        traces,
        truths,
        sim_config_grid,
        ordering_costs,
        COARSE,
        COARSE,
    )
    assert (optimum.p_order_thres, optimum.p_rep_thres) == (0.05, 0.05)
    assert optimum.m_hat == pytest.approx(0.0, abs=1e-12)
    assert optimum.params == OrderingPolicyParams(0.05, 0.05)


def test_ordering_search_matches_direct_evaluation(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    ordering_costs: CostModel,
) -> None:
    truths, traces = fleet
    optimum = optimize_ordering_thresholds(
        traces,
        truths,
        sim_config_grid,
        ordering_costs,
        COARSE,
        COARSE,
    )
    direct = evaluate_setting(
        traces,
        truths,
        sim_config_grid,
        ordering_costs,
        Setting.ORDERING,
        ordering=optimum.params,
    )
    assert optimum.m_hat == pytest.approx(direct.m_hat, rel=1e-9, abs=1e-12)


def test_ordering_search_skips_infeasible_units(ordering_costs: CostModel) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=30)
    truths = [UnitTruth("a", 15.0), UnitTruth("b", 185.0), UnitTruth("c", 200.0)]
    optimum = optimize_ordering_thresholds(
        perfect_traces(truths, grid),
        truths,
        grid,
        ordering_costs,
        COARSE,
        COARSE,
    )
    assert optimum.excluded_units == ("a",)


def test_selection_prefers_perfect_predictions(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    candidates = [
        HyperparameterCandidate("noisy", tuple(traces)),
        HyperparameterCandidate("perfect", tuple(perfect_traces(truths, sim_config_grid))),
    ]
    policy = HeuristicPolicy(Policy1Params(0.1))
    scores = score_candidates(candidates, truths, sim_config_grid, costs, policy=policy)
    assert [score.label for score in scores] == ["noisy", "perfect"]
    assert scores[1].m_hat == pytest.approx(0.0, abs=1e-12)
    chosen = select_hyperparameter_config(candidates, truths, sim_config_grid, costs, policy=policy)
    assert chosen == "perfect"


def test_selection_ties_go_to_first_candidate(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    candidates = [
        HyperparameterCandidate("first", tuple(traces)),
        HyperparameterCandidate("second", tuple(traces)),
    ]
    policy = HeuristicPolicy(Policy1Params(0.1))
    chosen = select_hyperparameter_config(candidates, truths, sim_config_grid, costs, policy=policy)
    assert chosen == "first"
    with pytest.raises(ConfigError):
        score_candidates([], truths, sim_config_grid, costs, policy=policy)


def test_best_candidate_index_prefers_lowest_then_earliest() -> None:
    scores = [
        CandidateScore("a", 0.4),
        CandidateScore("b", 0.1),
        CandidateScore("c", 0.1),
        CandidateScore("d", 0.3),
    ]
    assert best_candidate_index(scores) == 1
    assert best_candidate_index([CandidateScore("only", -0.2)]) == 0
    with pytest.raises(ConfigError):
        best_candidate_index([])


def test_sweep_policy_settings() -> None:
    assert SweepPolicy.ORDERING.setting is Setting.ORDERING
    assert SweepPolicy.ORDERING_OPTIMIZED.setting is Setting.ORDERING
    assert SweepPolicy.OPPORTUNITY.setting is Setting.REPLACEMENT
    assert SweepPolicy("heuristic-optimized") is SweepPolicy.HEURISTIC_OPTIMIZED


def test_cost_sweep_removes_duplicate_ratios(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
    caplog: pytest.LogCaptureFixture,
) -> None:
    truths, traces = fleet
    with caplog.at_level(logging.WARNING, logger="pdmeval.optimize"):
        report = cost_sweep(
            traces,
            truths,
            sim_config_grid,
            costs,
            [SweepPolicy.HEURISTIC, SweepPolicy.HEURISTIC_OPTIMIZED],
            ratios=[0.1, 0.2, 0.1],
            options=SweepOptions(thresholds=COARSE),
        )
    assert len(report.rows) == 4
    assert report.policies() == ["heuristic", "heuristic-optimized"]
    assert report.cost_ratios() == pytest.approx([0.1, 0.2])
    assert [issue.code for issue in report.issues] == [IssueCode.DUPLICATE_RATIO]
    assert "duplicate sweep value" in caplog.text
    for ratio in report.cost_ratios():
        fixed = report.lookup(ratio, "heuristic")
        tuned = report.lookup(ratio, "heuristic-optimized")
        assert fixed.ci_lo is not None and fixed.ci_hi is not None
        assert fixed.ci_lo <= fixed.m_hat <= fixed.ci_hi
        assert tuned.m_hat >= -1e-12


def test_cost_sweep_over_corrective_costs(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    report = cost_sweep(
        traces,
        truths,
        sim_config_grid,
        costs,
        [SweepPolicy.HEURISTIC],
        cc_values=[200.0],
    )
    assert report.cost_ratios() == pytest.approx([0.05])
    assert report.issues == []


def test_cost_sweep_flags_infeasible_ordering_units(ordering_costs: CostModel) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=30)
    truths = [UnitTruth("a", 15.0), UnitTruth("b", 185.0), UnitTruth("c", 200.0)]
    report = cost_sweep(
        perfect_traces(truths, grid),
        truths,
        grid,
        ordering_costs,
        [SweepPolicy.ORDERING],
        ratios=[0.1],
    )
    assert [issue.code for issue in report.issues] == [IssueCode.INFEASIBLE_PERFECT]
    assert report.issues[0].subject == "ordering"


@pytest.mark.parametrize(
    ("ratios", "cc_values", "policies"),
    [
        (None, None, [SweepPolicy.HEURISTIC]),
        ([0.1], [200.0], [SweepPolicy.HEURISTIC]),
        ([], None, [SweepPolicy.HEURISTIC]),
        ([0.1], None, []),
    ],
)
def test_cost_sweep_rejects_bad_arguments(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
    ratios: list[float] | None,
    cc_values: list[float] | None,
    policies: list[SweepPolicy],
) -> None:
    truths, traces = fleet
    with pytest.raises(ConfigError):
        cost_sweep(
            traces,
            truths,
            sim_config_grid,
            costs,
            policies,
            ratios=ratios,
            cc_values=cc_values,
        )


def test_opportunity_sweep_policy_uses_fitted_rbar(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    costs: CostModel,
) -> None:
    truths, traces = fleet
    evaluation = evaluate_sweep_policy(
        SweepPolicy.OPPORTUNITY,
        traces,
        truths,
        sim_config_grid,
        costs,
    )
    assert evaluation.n_units == len(truths)
    assert evaluation.m_hat > -1e-12


def test_threshold_that_avoids_a_failure_wins(costs: CostModel) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=10)
    far = PointMass(100.0)
    coin = WeightedSamples(values=(5.0, 50.0), weights=(0.5, 0.5))
    traces = [
        PredictionTrace("a", ((10.0, far), (20.0, far), (30.0, coin))),
        PredictionTrace(
            "b",
            ((10.0, far), (20.0, far), (30.0, far), (40.0, far), (50.0, PointMass(5.0))),
        ),
    ]
    truths = [UnitTruth("a", 35.0), UnitTruth("b", 55.0)]
    optimum = optimize_policy1_threshold(traces, truths, grid, costs, ThresholdGrid((0.3, 0.7)))
    assert optimum.p_thres == 0.3
    assert optimum.m_hat == pytest.approx(0.0, abs=1e-12)
    assert optimum.m_hat_by_threshold[1] > 0


def test_ordering_search_finds_the_enumerated_minimum(
    fleet: Fleet,
    sim_config_grid: TimeGrid,
    ordering_costs: CostModel,
) -> None:
    truths, traces = fleet
    truths, traces = truths[:3], traces[:3]
    surface = [
        evaluate_setting(
            traces,
            truths,
            sim_config_grid,
            ordering_costs,
            Setting.ORDERING,
            ordering=OrderingPolicyParams(p_order, p_rep),
        ).m_hat
        for p_order in COARSE.values
        for p_rep in COARSE.values
    ]
    optimum = optimize_ordering_thresholds(
        traces,
        truths,
        sim_config_grid,
        ordering_costs,
        COARSE,
        COARSE,
    )
    assert optimum.m_hat == pytest.approx(min(surface), rel=1e-9, abs=1e-12)


def test_selection_prefers_the_least_noisy_model(sim_config: SimulatorConfig) -> None:
    base = sim_config.with_overrides(n_units=100)
    candidates = []
    truths = []
    for sigma in (0.8, 0.15, 0.4):
        truths, traces = sample_fleet(base.with_overrides(sigma_ln_eps=sigma))
        candidates.append(HyperparameterCandidate(str(sigma), tuple(traces)))
    chosen = select_hyperparameter_config(
        candidates,
        truths,
        base.grid,
        CostModel(c_p=10.0, c_c=100.0),
        policy=HeuristicPolicy(Policy1Params(0.1)),
    )
    assert chosen == "0.15"


def test_threshold_search_accepts_cdf_point_predictions(costs: CostModel) -> None:
    grid = TimeGrid(delta_t=10.0, max_steps=10)
    prediction = CdfPoints(((15.0, 0.4), (30.0, 0.9)))
    truths = [UnitTruth("a", 35.0), UnitTruth("b", 58.0)]
    traces = []
    for truth in truths:
        steps = grid.decision_steps(truth.failure_time)
        entries = tuple((grid.time(step), prediction) for step in steps)
        traces.append(PredictionTrace(truth.unit_id, entries))
    direct = evaluate_setting(
        traces,
        truths,
        grid,
        costs,
        Setting.REPLACEMENT,
        policy=HeuristicPolicy(Policy1Params(0.2)),
    )
    optimum = optimize_policy1_threshold(traces, truths, grid, costs, ThresholdGrid((0.2, 0.5)))
    assert optimum.m_hat_by_threshold[0] == pytest.approx(direct.m_hat, rel=1e-12)
