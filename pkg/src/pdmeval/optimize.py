"""Decision-oriented tuning: heuristic thresholds, model selection and cost-ratio sweeps."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import CostModel, FloatArray, PredictionTrace, TimeGrid, UnitTruth, pair_fleet
from .errors import ConfigError, InputError
from .evaluation import (
    CiMethod,
    FleetEvaluation,
    Setting,
    evaluate_setting,
    metric_values,
    perfect_fleet,
    renewal_ratio,
)
from .policies import (
    HeuristicPolicy,
    OpportunityLossPolicy,
    OrderingPolicyParams,
    Policy1Params,
    RbarOption,
    RenewalPolicy,
    ReplacementPolicy,
    crossing_table,
    fit_population,
    heuristic_outcome_arrays,
    ordering_outcome_arrays,
    rbar_estimate,
)
from .report import IssueCode, IssueSeverity, ReportIssue, SweepReport, SweepRow
from .utils import dedupe_preserving_order, duplicates, parse_float_list

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = tuple(round(0.01 * step, 2) for step in range(1, 100))


@dataclass(frozen=True, slots=True)
class ThresholdGrid:
    """Candidate probability thresholds, strictly increasing inside (0, 1)."""

    values: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        values = tuple(float(value) for value in self.values)
        if not values:
            raise ConfigError("threshold grid is empty")
        if any(not 0.0 < value < 1.0 for value in values):
            raise ConfigError("thresholds must lie in (0, 1)")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("thresholds must be strictly increasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def parse(cls, text: str) -> ThresholdGrid:
        return cls(tuple(parse_float_list(text)))

    def array(self) -> FloatArray:
        return np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, slots=True)
class ThresholdOptimum:
    p_thres: float
    m_hat: float
    m_hat_by_threshold: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class OrderingOptimum:
    p_order_thres: float
    p_rep_thres: float
    m_hat: float
    excluded_units: tuple[str, ...] = ()

    @property
    def params(self) -> OrderingPolicyParams:
        return OrderingPolicyParams(self.p_order_thres, self.p_rep_thres)


def _fleet(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
) -> tuple[list[PredictionTrace], list[UnitTruth]]:
    pairs = pair_fleet(traces, truths)
    if len(pairs) < 2:
        raise InputError("threshold optimization needs at least two units")
    return [trace for trace, _ in pairs], [truth for _, truth in pairs]


def optimize_policy1_threshold(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    thresholds: ThresholdGrid | None = None,
    *,
    allow_failure: bool = False,
) -> ThresholdOptimum:
    """Exhaustive search for the heuristic threshold minimizing the metric.

    Ties go to the smaller threshold.
    """
    thresholds = thresholds or ThresholdGrid()
    trace_list, truth_list = _fleet(traces, truths)
    table = crossing_table(trace_list, truth_list, grid, thresholds.array())
    arrays = heuristic_outcome_arrays(table, grid, costs)
    perfect, _ = perfect_fleet(
        truth_list,
        grid,
        costs,
        Setting.REPLACEMENT,
        allow_failure=allow_failure,
    )
    values = metric_values(arrays.c_m, arrays.t_lc, renewal_ratio(perfect))
    index = int(np.argmin(values))
    logger.info(
        "best heuristic threshold %.4g (metric %.6g)",
        thresholds.values[index],
        values[index],
    )
    return ThresholdOptimum(
        p_thres=thresholds.values[index],
        m_hat=float(values[index]),
        m_hat_by_threshold=tuple(float(value) for value in values),
    )


def optimize_ordering_thresholds(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    order_grid: ThresholdGrid | None = None,
    rep_grid: ThresholdGrid | None = None,
) -> OrderingOptimum:
    """Search the (order, replacement) threshold product grid.

    Units whose perfect ordering is infeasible are left out. Ties go to the
    smaller order threshold, then the smaller replacement threshold.
    """
    order_grid = order_grid or ThresholdGrid()
    rep_grid = rep_grid or ThresholdGrid()
    trace_list, truth_list = _fleet(traces, truths)
    perfect, excluded = perfect_fleet(truth_list, grid, costs, Setting.ORDERING)
    if excluded:
        skip = set(excluded)
        trace_list = [trace for trace in trace_list if trace.unit_id not in skip]
        truth_list = [truth for truth in truth_list if truth.unit_id not in skip]
    if len(truth_list) < 2:
        raise InputError("fewer than two units remain after excluding infeasible ones")
    table = crossing_table(
        trace_list,
        truth_list,
        grid,
        rep_grid.array(),
        order_thresholds=order_grid.array(),
        lead_time=costs.lead_time,
    )
    r_perfect = renewal_ratio(perfect)
    surface = np.empty((len(order_grid), len(rep_grid)))
    for order_index in range(len(order_grid)):
        arrays = ordering_outcome_arrays(table, grid, costs, order_index)
        surface[order_index] = metric_values(arrays.c_m, arrays.t_lc, r_perfect)
    flat = int(np.argmin(surface))
    order_index, rep_index = divmod(flat, len(rep_grid))
    return OrderingOptimum(
        p_order_thres=order_grid.values[order_index],
        p_rep_thres=rep_grid.values[rep_index],
        m_hat=float(surface[order_index, rep_index]),
        excluded_units=excluded,
    )


@dataclass(frozen=True, slots=True)
class HyperparameterCandidate:
    """Prediction traces from a model trained under one hyperparameter setting."""

    label: str
    traces: tuple[PredictionTrace, ...]


@dataclass(frozen=True, slots=True)
class CandidateScore:
    label: str
    m_hat: float


def score_candidates(
    candidates: Sequence[HyperparameterCandidate],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    *,
    setting: Setting = Setting.REPLACEMENT,
    policy: ReplacementPolicy | None = None,
    ordering: OrderingPolicyParams | None = None,
) -> list[CandidateScore]:
    if not candidates:
        raise ConfigError("at least one hyperparameter candidate is required")
    truth_list = list(truths)
    scores = []
    for candidate in candidates:
        evaluation = evaluate_setting(
            candidate.traces,
            truth_list,
            grid,
            costs,
            setting,
            policy=policy,
            ordering=ordering,
        )
        logger.info("candidate %s: metric %.6g", candidate.label, evaluation.m_hat)
        scores.append(CandidateScore(label=candidate.label, m_hat=evaluation.m_hat))
    return scores


def best_candidate_index(scores: Sequence[CandidateScore]) -> int:
    """Index of the lowest metric; the earliest candidate wins ties."""
    if not scores:
        raise ConfigError("at least one candidate score is required")
    return min(range(len(scores)), key=lambda index: (scores[index].m_hat, index))


def select_hyperparameter_config(
    candidates: Sequence[HyperparameterCandidate],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    *,
    setting: Setting = Setting.REPLACEMENT,
    policy: ReplacementPolicy | None = None,
    ordering: OrderingPolicyParams | None = None,
) -> str:
    """Label of the candidate with the lowest metric; the first one wins ties."""
    scores = score_candidates(
        candidates,
        truths,
        grid,
        costs,
        setting=setting,
        policy=policy,
        ordering=ordering,
    )
    return scores[best_candidate_index(scores)].label


class SweepPolicy(str, Enum):
    HEURISTIC = "heuristic"
    HEURISTIC_OPTIMIZED = "heuristic-optimized"
    RENEWAL = "renewal"
    OPPORTUNITY = "opportunity"
    ORDERING = "ordering"
    ORDERING_OPTIMIZED = "ordering-optimized"

    @property
    def setting(self) -> Setting:
        if self in (SweepPolicy.ORDERING, SweepPolicy.ORDERING_OPTIMIZED):
            return Setting.ORDERING
        return Setting.REPLACEMENT


@dataclass(slots=True)
class SweepOptions:
    rbar_option: RbarOption = RbarOption.UPPER_BOUND_RENEWAL
    thresholds: ThresholdGrid = field(default_factory=ThresholdGrid)
    ci_method: CiMethod = CiMethod.NORMAL
    allow_failure: bool = False


def evaluate_sweep_policy(
    policy: SweepPolicy,
    traces: Sequence[PredictionTrace],
    truths: Sequence[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    options: SweepOptions | None = None,
) -> FleetEvaluation:
    """Evaluate one named policy at one cost setting."""
    options = options or SweepOptions()
    replacement: ReplacementPolicy | None = None
    ordering: OrderingPolicyParams | None = None
    if policy is SweepPolicy.HEURISTIC:
        replacement = HeuristicPolicy(Policy1Params(costs.ratio))
    elif policy is SweepPolicy.HEURISTIC_OPTIMIZED:
        optimum = optimize_policy1_threshold(
            traces,
            truths,
            grid,
            costs,
            options.thresholds,
            allow_failure=options.allow_failure,
        )
        replacement = HeuristicPolicy(Policy1Params(optimum.p_thres))
    elif policy is SweepPolicy.RENEWAL:
        replacement = RenewalPolicy()
    elif policy is SweepPolicy.OPPORTUNITY:
        r_bar = rbar_estimate(fit_population(truths), costs, options.rbar_option)
        replacement = OpportunityLossPolicy(r_bar)
    elif policy is SweepPolicy.ORDERING:
        ordering = OrderingPolicyParams(costs.ratio, costs.ratio)
    else:
        ordering = optimize_ordering_thresholds(
            traces,
            truths,
            grid,
            costs,
            options.thresholds,
            options.thresholds,
        ).params
    return evaluate_setting(
        traces,
        truths,
        grid,
        costs,
        policy.setting,
        policy=replacement,
        ordering=ordering,
        allow_failure=options.allow_failure,
        ci_method=options.ci_method,
    )


def cost_sweep(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    base_costs: CostModel,
    policies: Sequence[SweepPolicy],
    *,
    ratios: Sequence[float] | None = None,
    cc_values: Sequence[float] | None = None,
    options: SweepOptions | None = None,
) -> SweepReport:
    """Metric for every (cost setting, policy) pair.

    Either ``ratios`` (c_p / c_c, with c_p held) or ``cc_values`` (corrective
    cost, with c_p held) must be given, not both.
    """
    if (ratios is None) == (cc_values is None):
        raise ConfigError("give exactly one of cost ratios or corrective costs")
    values = list(ratios if ratios is not None else cc_values or [])
    if not values:
        raise ConfigError("the sweep needs at least one cost value")
    if not policies:
        raise ConfigError("the sweep needs at least one policy")
    report = SweepReport()
    for value in duplicates(values):
        logger.warning("duplicate sweep value %g removed", value)
        report.issues.append(
            ReportIssue(
                subject=repr(value),
                message="duplicate sweep value removed",
                severity=IssueSeverity.WARNING,
                code=IssueCode.DUPLICATE_RATIO,
            ),
        )
    pairs = pair_fleet(traces, truths)
    trace_list = [trace for trace, _ in pairs]
    truth_list = [truth for _, truth in pairs]
    for value in dedupe_preserving_order(values):
        if ratios is not None:
            costs = base_costs.with_ratio(value)
        else:
            costs = base_costs.with_corrective(value)
        logger.info("sweep at c_p/c_c = %.4g", costs.ratio)
        for policy in dedupe_preserving_order(policies):
            evaluation = evaluate_sweep_policy(policy, trace_list, truth_list, grid, costs, options)
            ci = evaluation.ci95_m
            report.add(
                SweepRow(
                    cost_ratio=costs.ratio,
                    policy=policy.value,
                    m_hat=evaluation.m_hat,
                    ci_lo=None if ci is None else ci[0],
                    ci_hi=None if ci is None else ci[1],
                ),
            )
            if evaluation.excluded_units:
                report.issues.append(
                    ReportIssue(
                        subject=policy.value,
                        message=(
                            f"{len(evaluation.excluded_units)} units excluded at "
                            f"c_p/c_c={costs.ratio:.4g}: perfect ordering infeasible"
                        ),
                        severity=IssueSeverity.WARNING,
                        code=IssueCode.INFEASIBLE_PERFECT,
                    ),
                )
    return report


__all__ = [
    "DEFAULT_THRESHOLDS",
    "CandidateScore",
    "HyperparameterCandidate",
    "OrderingOptimum",
    "SweepOptions",
    "SweepPolicy",
    "ThresholdGrid",
    "ThresholdOptimum",
    "best_candidate_index",
    "cost_sweep",
    "evaluate_sweep_policy",
    "optimize_ordering_thresholds",
    "optimize_policy1_threshold",
    "score_candidates",
    "select_hyperparameter_config",
]
