"""Replacement and ordering decision rules, perfect baselines and the per-unit runners."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Protocol, TypeAlias, runtime_checkable

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from .core import (
    GRID_TOLERANCE,
    CdfPoints,
    CostModel,
    FloatArray,
    LifecycleOutcome,
    PredictionTrace,
    ReplacementKind,
    RulDistribution,
    TimeGrid,
    UnitTruth,
    expected_exceedance,
    pair_fleet,
    prob_rul_leq,
    quantile,
    truncated_mean_below,
)
from .errors import ConfigError, DomainError, InfeasiblePerfectError, InputError, NumericalError

logger = logging.getLogger(__name__)

SEARCH_POINTS = 512
BRACKET_QUANTILE = 0.9999
GOLDEN_XTOL = 1e-12
RBAR_GRID_POINTS = 8192
RBAR_TAIL_SIGMAS = 8.0

IntArray: TypeAlias = NDArray[np.intp]


class ReplacementAction(str, Enum):
    DO_NOTHING = "do_nothing"
    PREVENTIVE_REPLACE = "preventive_replace"


class OrderAction(str, Enum):
    ORDER = "order"
    NO_ORDER = "no_order"


def _probability_parameter(value: float, *, name: str) -> float:
    if not (isinstance(value, int | float) and 0.0 < value < 1.0):
        raise ConfigError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


@dataclass(frozen=True, slots=True)
class Policy1Params:
    p_thres: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_thres", _probability_parameter(self.p_thres, name="p_thres"))


@dataclass(frozen=True, slots=True)
class OrderingPolicyParams:
    p_order_thres: float
    p_rep_thres: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "p_order_thres",
            _probability_parameter(self.p_order_thres, name="p_order_thres"),
        )
        object.__setattr__(
            self,
            "p_rep_thres",
            _probability_parameter(self.p_rep_thres, name="p_rep_thres"),
        )


class RbarOption(str, Enum):
    """Choice of the long-run cost rate that prices lost component life."""

    UPPER_BOUND_RENEWAL = "upper"
    LOWER_BOUND_PERFECT = "lower"
    AVERAGE_OF_BOUNDS = "average"


@dataclass(frozen=True, slots=True)
class PopulationTtf:
    """Normal fit of the fleet's time to failure."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError("population mean failure time must be positive")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError("population failure time spread must be positive")


@dataclass(frozen=True, slots=True)
class OrderingState:
    ordered: bool = False


def fit_population(truths: Iterable[UnitTruth]) -> PopulationTtf:
    """Method-of-moments normal fit with the unbiased standard deviation."""
    failure_times = np.asarray([truth.failure_time for truth in truths], dtype=np.float64)
    if failure_times.size < 2:
        raise DomainError("fitting the population needs at least two failure times")
    return PopulationTtf(
        mu=float(failure_times.mean()),
        sigma=float(failure_times.std(ddof=1)),
    )


def policy1_step(
    dist: RulDistribution,
    delta_t: float,
    params: Policy1Params,
) -> ReplacementAction:
    if prob_rul_leq(dist, delta_t) >= params.p_thres:
        return ReplacementAction.PREVENTIVE_REPLACE
    return ReplacementAction.DO_NOTHING


def _renewal_values(
    horizons: FloatArray,
    t_k: float,
    dist: RulDistribution,
    costs: CostModel,
) -> FloatArray:
    failure = prob_rul_leq(dist, horizons)
    survive = 1.0 - failure
    numerator = survive * costs.c_p + failure * costs.c_c
    denominator = survive * (t_k + horizons) + t_k * failure + truncated_mean_below(dist, horizons)
    if np.any(denominator <= 0):
        raise NumericalError("expected life-cycle length is not positive")
    return np.asarray(numerator / denominator, dtype=np.float64)


def _opportunity_values(
    horizons: FloatArray,
    dist: RulDistribution,
    costs: CostModel,
    r_bar: float,
) -> FloatArray:
    failure = prob_rul_leq(dist, horizons)
    survive = 1.0 - failure
    lost_life = expected_exceedance(dist, horizons)
    return np.asarray(
        survive * costs.c_p + failure * costs.c_c + r_bar * lost_life,
        dtype=np.float64,
    )


def _check_replacement_time(T_R: float, t_k: float) -> None:
    if not T_R > t_k:
        raise DomainError(f"replacement time {T_R} must lie after the decision time {t_k}")


def policy2_objective(T_R: float, t_k: float, dist: RulDistribution, costs: CostModel) -> float:
    """Expected cost per unit time of replacing at T_R, given the prediction at t_k."""
    _check_replacement_time(T_R, t_k)
    return float(_renewal_values(np.asarray([T_R - t_k]), t_k, dist, costs)[0])


def policy3_objective(
    T_R: float,
    t_k: float,
    dist: RulDistribution,
    costs: CostModel,
    r_bar: float,
) -> float:
    """Expected replacement cost plus lost remaining life priced at ``r_bar``."""
    _check_replacement_time(T_R, t_k)
    if not r_bar > 0:
        raise DomainError("r_bar must be positive")
    return float(_opportunity_values(np.asarray([T_R - t_k]), dist, costs, r_bar)[0])


class ObjectiveKind(str, Enum):
    RENEWAL = "renewal"
    OPPORTUNITY = "opportunity"


@dataclass(frozen=True, slots=True)
class Objective:
    kind: ObjectiveKind
    r_bar: float | None = None

    def __post_init__(self) -> None:
        positive = self.r_bar is not None and self.r_bar > 0
        if self.kind is ObjectiveKind.OPPORTUNITY and not positive:
            raise DomainError("the opportunity-loss objective needs a positive r_bar")

    @classmethod
    def renewal(cls) -> Objective:
        return cls(ObjectiveKind.RENEWAL)

    @classmethod
    def opportunity(cls, r_bar: float) -> Objective:
        return cls(ObjectiveKind.OPPORTUNITY, r_bar)

    def values(
        self,
        horizons: FloatArray,
        t_k: float,
        dist: RulDistribution,
        costs: CostModel,
    ) -> FloatArray:
        if self.kind is ObjectiveKind.RENEWAL:
            return _renewal_values(horizons, t_k, dist, costs)
        assert self.r_bar is not None
        return _opportunity_values(horizons, dist, costs, self.r_bar)


@dataclass(frozen=True, slots=True)
class _SearchBracket:
    lower: float
    best: float
    upper: float
    value: float
    refinable: bool


def _grid_search(
    t_k: float,
    dist: RulDistribution,
    costs: CostModel,
    objective: Objective,
) -> _SearchBracket | None:
    q_hi = quantile(dist, BRACKET_QUANTILE)
    if q_hi <= 0:
        return None
    horizons = q_hi * np.arange(1, SEARCH_POINTS + 1, dtype=np.float64) / SEARCH_POINTS
    values = objective.values(horizons, t_k, dist, costs)
    index = int(np.argmin(values))
    times = t_k + horizons
    if index == 0 or index == SEARCH_POINTS - 1:
        best = float(times[index])
        return _SearchBracket(best, best, best, float(values[index]), refinable=False)
    return _SearchBracket(
        lower=float(times[index - 1]),
        best=float(times[index]),
        upper=float(times[index + 1]),
        value=float(values[index]),
        refinable=True,
    )


def _refine(
    bracket: _SearchBracket,
    t_k: float,
    dist: RulDistribution,
    costs: CostModel,
    objective: Objective,
) -> float:
    if not bracket.refinable:
        return bracket.best

    def scalar(T: float) -> float:
        return float(objective.values(np.asarray([T - t_k]), t_k, dist, costs)[0])

    try:
        result = minimize_scalar(
            scalar,
            bracket=(bracket.lower, bracket.best, bracket.upper),
            method="golden",
            options={"xtol": GOLDEN_XTOL},
        )
    except ValueError:
        # flat objective around the grid minimum: no strict bracket
        logger.debug("no strict bracket at t_k=%g; keeping grid optimum %g", t_k, bracket.best)
        return bracket.best
    refined = float(result.x)
    if bracket.lower <= refined <= bracket.upper and float(result.fun) < bracket.value:
        return refined
    return bracket.best


def optimal_replacement_time(
    t_k: float,
    dist: RulDistribution,
    costs: CostModel,
    objective: Objective,
) -> float:
    """Minimize ``objective`` over T_R in (t_k, t_k + q_hi].

    A 512-point grid locates the best point; golden-section search refines it
    inside the neighbouring grid points.
    """
    bracket = _grid_search(t_k, dist, costs, objective)
    if bracket is None:
        return t_k
    return _refine(bracket, t_k, dist, costs, objective)


def policy23_step(t_k: float, delta_t: float, T_star: float) -> ReplacementAction:
    if t_k + delta_t >= T_star:
        return ReplacementAction.PREVENTIVE_REPLACE
    return ReplacementAction.DO_NOTHING


def _standard_normal_pdf(z: FloatArray) -> FloatArray:
    return np.asarray(np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi), dtype=np.float64)


def _age_replacement_rate(
    tau: FloatArray,
    pop: PopulationTtf,
    costs: CostModel,
) -> FloatArray:
    z = (tau - pop.mu) / pop.sigma
    failure = ndtr(z)
    survive = 1.0 - failure
    numerator = failure * costs.c_c + survive * costs.c_p
    denominator = pop.mu * failure - pop.sigma * _standard_normal_pdf(z) + tau * survive
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(denominator > 0, numerator / denominator, np.inf)
    return np.asarray(rate, dtype=np.float64)


def _age_replacement_optimum(pop: PopulationTtf, costs: CostModel) -> float:
    taus = np.linspace(0.0, pop.mu + RBAR_TAIL_SIGMAS * pop.sigma, RBAR_GRID_POINTS + 1)[1:]
    rates = _age_replacement_rate(taus, pop, costs)
    index = int(np.argmin(rates))
    best = float(rates[index])
    if not math.isfinite(best):
        raise NumericalError("age-replacement cost rate has no finite value")
    lower = float(taus[max(index - 1, 0)])
    upper = float(taus[min(index + 1, taus.size - 1)])
    refined = minimize_scalar(
        lambda tau: float(_age_replacement_rate(np.asarray([tau]), pop, costs)[0]),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": 1e-10 * max(upper, 1.0)},
    )
    return min(best, float(refined.fun))


def rbar_estimate(pop: PopulationTtf, costs: CostModel, option: RbarOption) -> float:
    """Long-run cost-rate estimate used to price lost component life.

    The lower bound is the perfect-knowledge rate c_p / mu; the upper bound
    is the best age-replacement rate against the population distribution.
    """
    lower = costs.c_p / pop.mu
    if option is RbarOption.LOWER_BOUND_PERFECT:
        return lower
    upper = max(_age_replacement_optimum(pop, costs), lower)
    if option is RbarOption.UPPER_BOUND_RENEWAL:
        return upper
    return 0.5 * (upper + lower)


def order_window(lead_time: float, delta_t: float) -> float:
    """Lead time rounded up to the decision grid."""
    return math.ceil(lead_time / delta_t - GRID_TOLERANCE) * delta_t if lead_time > 0 else 0.0


def probability_at_horizon(dist: RulDistribution, horizon: float) -> float:
    """P(RUL <= horizon); CDF-point traces must carry that exact threshold."""
    if isinstance(dist, CdfPoints):
        probability = dist.probability_at(horizon)
        if probability is None:
            raise InputError(f"cdf_points prediction has no threshold at {horizon}")
        return probability
    return prob_rul_leq(dist, horizon)


def ordering_step(
    dist: RulDistribution,
    delta_t: float,
    lead_time: float,
    state: OrderingState,
    params: OrderingPolicyParams,
) -> tuple[OrderAction, ReplacementAction]:
    order = OrderAction.NO_ORDER
    if not state.ordered:
        window = order_window(lead_time, delta_t)
        if probability_at_horizon(dist, window + delta_t) >= params.p_order_thres:
            order = OrderAction.ORDER
    replace = ReplacementAction.DO_NOTHING
    if prob_rul_leq(dist, delta_t) >= params.p_rep_thres:
        replace = ReplacementAction.PREVENTIVE_REPLACE
    return order, replace


@runtime_checkable
class ReplacementPolicy(Protocol):
    """A stationary rule mapping the prediction at t_k to a replacement action."""

    name: str

    def decide(
        self,
        t_k: float,
        dist: RulDistribution,
        delta_t: float,
        costs: CostModel,
    ) -> ReplacementAction: ...


@dataclass(frozen=True, slots=True)
class HeuristicPolicy:
    params: Policy1Params
    name: ClassVar[str] = "heuristic"

    def decide(
        self,
        t_k: float,
        dist: RulDistribution,
        delta_t: float,
        costs: CostModel,
    ) -> ReplacementAction:
        return policy1_step(dist, delta_t, self.params)


def _objective_decision(
    t_k: float,
    dist: RulDistribution,
    delta_t: float,
    costs: CostModel,
    objective: Objective,
) -> ReplacementAction:
    bracket = _grid_search(t_k, dist, costs, objective)
    if bracket is None:
        return policy23_step(t_k, delta_t, t_k)
    deadline = t_k + delta_t
    # the refined optimum stays inside the bracket
    if bracket.upper <= deadline:
        return ReplacementAction.PREVENTIVE_REPLACE
    if bracket.lower > deadline:
        return ReplacementAction.DO_NOTHING
    return policy23_step(t_k, delta_t, _refine(bracket, t_k, dist, costs, objective))


@dataclass(frozen=True, slots=True)
class RenewalPolicy:
    name: ClassVar[str] = "renewal"

    def decide(
        self,
        t_k: float,
        dist: RulDistribution,
        delta_t: float,
        costs: CostModel,
    ) -> ReplacementAction:
        return _objective_decision(t_k, dist, delta_t, costs, Objective.renewal())


@dataclass(frozen=True, slots=True)
class OpportunityLossPolicy:
    r_bar: float
    name: ClassVar[str] = "opportunity"

    def __post_init__(self) -> None:
        if not self.r_bar > 0:
            raise DomainError("r_bar must be positive")

    def decide(
        self,
        t_k: float,
        dist: RulDistribution,
        delta_t: float,
        costs: CostModel,
    ) -> ReplacementAction:
        return _objective_decision(t_k, dist, delta_t, costs, Objective.opportunity(self.r_bar))


def _check_pair(trace: PredictionTrace, truth: UnitTruth) -> None:
    if trace.unit_id != truth.unit_id:
        raise InputError(f"trace {trace.unit_id!r} does not belong to unit {truth.unit_id!r}")


def _visited(
    trace: PredictionTrace,
    truth: UnitTruth,
    grid: TimeGrid,
) -> Iterator[tuple[float, RulDistribution]]:
    by_step = trace.by_step(grid)
    for step in grid.decision_steps(truth.failure_time):
        dist = by_step.get(step)
        if dist is None:
            raise InputError(
                f"unit {truth.unit_id}: no prediction at t={grid.time(step)} before failure",
            )
        yield grid.time(step), dist


def run_replacement_policy_on_unit(
    trace: PredictionTrace,
    truth: UnitTruth,
    grid: TimeGrid,
    costs: CostModel,
    policy: ReplacementPolicy,
) -> LifecycleOutcome:
    _check_pair(trace, truth)
    for t_k, dist in _visited(trace, truth, grid):
        if policy.decide(t_k, dist, grid.delta_t, costs) is ReplacementAction.PREVENTIVE_REPLACE:
            return LifecycleOutcome(
                unit_id=truth.unit_id,
                t_lc=t_k,
                replacement_kind=ReplacementKind.PREVENTIVE,
                c_rep=costs.c_p,
            )
    return LifecycleOutcome(
        unit_id=truth.unit_id,
        t_lc=truth.failure_time,
        replacement_kind=ReplacementKind.CORRECTIVE,
        c_rep=costs.c_c,
    )


def ordering_outcome(
    unit_id: str,
    t_lc: float,
    kind: ReplacementKind,
    t_order: float,
    costs: CostModel,
) -> LifecycleOutcome:
    """Assemble delay and holding costs for a spare ordered at ``t_order``."""
    delivery = t_order + costs.lead_time
    return LifecycleOutcome(
        unit_id=unit_id,
        t_lc=t_lc,
        replacement_kind=kind,
        c_rep=costs.c_p if kind is ReplacementKind.PREVENTIVE else costs.c_c,
        t_order=t_order,
        c_delay=max(delivery - t_lc, 0.0) * costs.c_unav,
        c_stock=max(t_lc - delivery, 0.0) * costs.c_inv,
    )


def run_ordering_policy_on_unit(
    trace: PredictionTrace,
    truth: UnitTruth,
    grid: TimeGrid,
    costs: CostModel,
    params: OrderingPolicyParams,
) -> LifecycleOutcome:
    """Run the order/replace heuristic; a spare never ordered is ordered at end of life."""
    _check_pair(trace, truth)
    t_order: float | None = None
    for t_k, dist in _visited(trace, truth, grid):
        order, replace = ordering_step(
            dist,
            grid.delta_t,
            costs.lead_time,
            OrderingState(ordered=t_order is not None),
            params,
        )
        if order is OrderAction.ORDER:
            t_order = t_k
        if replace is ReplacementAction.PREVENTIVE_REPLACE:
            return ordering_outcome(
                truth.unit_id,
                t_k,
                ReplacementKind.PREVENTIVE,
                t_k if t_order is None else t_order,
                costs,
            )
    t_lc = truth.failure_time
    return ordering_outcome(
        truth.unit_id,
        t_lc,
        ReplacementKind.CORRECTIVE,
        t_lc if t_order is None else t_order,
        costs,
    )


def perfect_replacement_time(truth: UnitTruth, grid: TimeGrid) -> float:
    """Last decision time strictly before failure."""
    step = min(grid.last_step_before(truth.failure_time), grid.max_steps)
    if step < 1:
        raise DomainError(
            f"unit {truth.unit_id}: no decision time before failure at {truth.failure_time}",
        )
    return grid.time(step)


def perfect_outcome_replacement(
    truth: UnitTruth,
    grid: TimeGrid,
    costs: CostModel,
    *,
    allow_failure: bool = False,
) -> LifecycleOutcome:
    """Perfect-knowledge replacement at the last decision time before failure.

    With ``allow_failure`` the unit runs to failure instead whenever that gives
    the lower cost per unit time.
    """
    t_r = perfect_replacement_time(truth, grid)
    if allow_failure and costs.c_c / truth.failure_time < costs.c_p / t_r:
        return LifecycleOutcome(
            unit_id=truth.unit_id,
            t_lc=truth.failure_time,
            replacement_kind=ReplacementKind.CORRECTIVE,
            c_rep=costs.c_c,
        )
    return LifecycleOutcome(
        unit_id=truth.unit_id,
        t_lc=t_r,
        replacement_kind=ReplacementKind.PREVENTIVE,
        c_rep=costs.c_p,
    )


def perfect_outcome_ordering(
    truth: UnitTruth,
    grid: TimeGrid,
    costs: CostModel,
) -> LifecycleOutcome:
    t_r = perfect_replacement_time(truth, grid)
    t_order = t_r - costs.lead_time
    if t_order < 0:
        raise InfeasiblePerfectError(
            truth.unit_id,
            f"perfect replacement at {t_r} is earlier than the lead time {costs.lead_time}",
        )
    return LifecycleOutcome(
        unit_id=truth.unit_id,
        t_lc=t_r,
        replacement_kind=ReplacementKind.PREVENTIVE,
        c_rep=costs.c_p,
        t_order=t_order,
    )


def run_fleet(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    policy: ReplacementPolicy,
) -> list[LifecycleOutcome]:
    return [
        run_replacement_policy_on_unit(trace, truth, grid, costs, policy)
        for trace, truth in pair_fleet(traces, truths)
    ]


def run_ordering_fleet(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    params: OrderingPolicyParams,
) -> list[LifecycleOutcome]:
    return [
        run_ordering_policy_on_unit(trace, truth, grid, costs, params)
        for trace, truth in pair_fleet(traces, truths)
    ]


def step_probabilities(
    trace: PredictionTrace,
    truth: UnitTruth,
    grid: TimeGrid,
    horizon: float,
    *,
    exact: bool = False,
) -> FloatArray:
    """P(RUL <= horizon) at every decision step the unit lives through.

    With ``exact`` a CDF-point prediction must carry ``horizon`` itself, as the
    ordering rule requires; otherwise it is interpolated like any other CDF.
    """
    _check_pair(trace, truth)
    dists = [dist for _, dist in _visited(trace, truth, grid)]
    if exact:
        values = [probability_at_horizon(dist, horizon) for dist in dists]
    else:
        values = [prob_rul_leq(dist, horizon) for dist in dists]
    return np.asarray(values, dtype=np.float64)


def first_crossing_steps(probabilities: FloatArray, thresholds: FloatArray) -> IntArray:
    """Index of the first step reaching each threshold; ``len(probabilities)`` if none does."""
    if probabilities.size == 0:
        return np.zeros(np.shape(thresholds), dtype=np.intp)
    running = np.maximum.accumulate(probabilities)
    return np.searchsorted(running, thresholds, side="left").astype(np.intp)


@dataclass(frozen=True, slots=True)
class CrossingTable:
    """First-crossing step indices for a fleet, one row per unit.

    ``steps[i]`` is the number of decision steps unit ``i`` lives through;
    a crossing index equal to it means the threshold was never reached.
    """

    unit_ids: tuple[str, ...]
    failure_times: FloatArray
    steps: IntArray
    replacement: IntArray
    order: IntArray | None = None


def crossing_table(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    rep_thresholds: FloatArray,
    *,
    order_thresholds: FloatArray | None = None,
    lead_time: float = 0.0,
) -> CrossingTable:
    pairs = pair_fleet(traces, truths)
    replacement = []
    order = []
    steps = []
    window = order_window(lead_time, grid.delta_t)
    for trace, truth in pairs:
        p_rep = step_probabilities(trace, truth, grid, grid.delta_t)
        steps.append(p_rep.size)
        replacement.append(first_crossing_steps(p_rep, rep_thresholds))
        if order_thresholds is not None:
            p_order = step_probabilities(trace, truth, grid, window + grid.delta_t, exact=True)
            order.append(first_crossing_steps(p_order, order_thresholds))
    return CrossingTable(
        unit_ids=tuple(truth.unit_id for _, truth in pairs),
        failure_times=np.asarray([truth.failure_time for _, truth in pairs], dtype=np.float64),
        steps=np.asarray(steps, dtype=np.intp),
        replacement=np.asarray(replacement, dtype=np.intp).reshape(len(pairs), -1),
        order=None
        if order_thresholds is None
        else np.asarray(order, dtype=np.intp).reshape(len(pairs), -1),
    )


@dataclass(frozen=True, slots=True)
class OutcomeArrays:
    """Per-unit cost and life-cycle length, one column per threshold setting."""

    c_m: FloatArray
    t_lc: FloatArray


def heuristic_outcome_arrays(
    table: CrossingTable,
    grid: TimeGrid,
    costs: CostModel,
) -> OutcomeArrays:
    steps = table.steps[:, None]
    preventive = table.replacement < steps
    replaced_at = (table.replacement + 1) * grid.delta_t
    t_lc = np.where(preventive, replaced_at, table.failure_times[:, None])
    c_m = np.where(preventive, costs.c_p, costs.c_c)
    return OutcomeArrays(c_m=c_m.astype(np.float64), t_lc=t_lc.astype(np.float64))


def ordering_outcome_arrays(
    table: CrossingTable,
    grid: TimeGrid,
    costs: CostModel,
    order_index: int,
) -> OutcomeArrays:
    """Outcomes for one order threshold against every replacement threshold."""
    if table.order is None:
        raise DomainError("crossing table was built without order thresholds")
    heuristic = heuristic_outcome_arrays(table, grid, costs)
    steps = table.steps[:, None]
    order_step = table.order[:, order_index][:, None]
    ordered = (order_step < steps) & (order_step <= table.replacement)
    t_order = np.where(ordered, (order_step + 1) * grid.delta_t, heuristic.t_lc)
    delivery = t_order + costs.lead_time
    c_delay = np.maximum(delivery - heuristic.t_lc, 0.0) * costs.c_unav
    c_stock = np.maximum(heuristic.t_lc - delivery, 0.0) * costs.c_inv
    return OutcomeArrays(c_m=heuristic.c_m + c_delay + c_stock, t_lc=heuristic.t_lc)


def make_policy(
    name: str,
    *,
    costs: CostModel,
    p_thres: float | None = None,
    r_bar: float | None = None,
) -> ReplacementPolicy:
    """Build a replacement policy by name."""
    factories: dict[str, Callable[[], ReplacementPolicy]] = {
        HeuristicPolicy.name: lambda: HeuristicPolicy(
            Policy1Params(costs.ratio if p_thres is None else p_thres),
        ),
        RenewalPolicy.name: RenewalPolicy,
        OpportunityLossPolicy.name: lambda: OpportunityLossPolicy(
            r_bar if r_bar is not None else _missing_rbar(),
        ),
    }
    try:
        factory = factories[name]
    except KeyError:
        raise ConfigError(f"unknown replacement policy: {name!r}") from None
    return factory()


def _missing_rbar() -> float:
    raise ConfigError("the opportunity policy needs an r_bar estimate")


__all__ = [
    "CrossingTable",
    "HeuristicPolicy",
    "Objective",
    "ObjectiveKind",
    "OpportunityLossPolicy",
    "OrderAction",
    "OrderingPolicyParams",
    "OrderingState",
    "OutcomeArrays",
    "Policy1Params",
    "PopulationTtf",
    "RbarOption",
    "RenewalPolicy",
    "ReplacementAction",
    "ReplacementPolicy",
    "crossing_table",
    "first_crossing_steps",
    "fit_population",
    "heuristic_outcome_arrays",
    "make_policy",
    "optimal_replacement_time",
    "order_window",
    "ordering_outcome",
    "ordering_outcome_arrays",
    "ordering_step",
    "perfect_outcome_ordering",
    "perfect_outcome_replacement",
    "perfect_replacement_time",
    "policy1_step",
    "policy23_step",
    "policy2_objective",
    "policy3_objective",
    "probability_at_horizon",
    "rbar_estimate",
    "run_fleet",
    "run_ordering_fleet",
    "run_ordering_policy_on_unit",
    "run_replacement_policy_on_unit",
    "step_probabilities",
]
