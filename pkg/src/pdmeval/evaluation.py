"""Renewal-reward estimates of the long-run cost rate and the metric against perfect prognostics."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .core import (
    CostModel,
    FloatArray,
    LifecycleOutcome,
    PredictionTrace,
    ReplacementKind,
    TimeGrid,
    UnitTruth,
    pair_fleet,
)
from .errors import DomainError, InfeasiblePerfectError, InputError
from .policies import (
    OrderingPolicyParams,
    ReplacementPolicy,
    perfect_outcome_ordering,
    perfect_outcome_replacement,
    run_ordering_policy_on_unit,
    run_replacement_policy_on_unit,
)

logger = logging.getLogger(__name__)

Z_95 = 1.96
DEFAULT_RESAMPLES = 10_000
_BOOTSTRAP_CHUNK = 1_000


class Setting(str, Enum):
    REPLACEMENT = "replacement"
    ORDERING = "ordering"


class CiMethod(str, Enum):
    NORMAL = "normal"
    BOOTSTRAP = "bootstrap"


@dataclass(slots=True)
class FleetEvaluation:
    r_hat: float
    var_r_hat: float | None
    r_perfect: float
    var_r_perfect: float | None
    m_hat: float
    var_m_hat: float | None
    ci95_m: tuple[float, float] | None
    n_units: int
    outcomes: list[LifecycleOutcome] = field(default_factory=list)
    perfect_outcomes: list[LifecycleOutcome] = field(default_factory=list)
    ci_method: CiMethod = CiMethod.NORMAL
    variance_clamped: bool = False
    excluded_units: tuple[str, ...] = ()

    @property
    def preventive_share(self) -> float:
        if not self.outcomes:
            return 0.0
        count = sum(
            1 for outcome in self.outcomes if outcome.replacement_kind is ReplacementKind.PREVENTIVE
        )
        return count / len(self.outcomes)

    def summary(self) -> dict[str, Any]:
        return {
            "r_hat": self.r_hat,
            "var_r_hat": self.var_r_hat,
            "r_perfect": self.r_perfect,
            "var_r_perfect": self.var_r_perfect,
            "m_hat": self.m_hat,
            "var_m_hat": self.var_m_hat,
            "ci95_m": None if self.ci95_m is None else list(self.ci95_m),
            "ci_method": self.ci_method.value,
            "n_units": self.n_units,
            "variance_clamped": self.variance_clamped,
            "excluded_units": list(self.excluded_units),
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.summary(),
            "outcomes": [outcome.to_dict() for outcome in self.outcomes],
            "perfect_outcomes": [outcome.to_dict() for outcome in self.perfect_outcomes],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FleetEvaluation:
        ci = data.get("ci95_m")
        return cls(
            r_hat=float(data["r_hat"]),
            var_r_hat=_optional_float(data.get("var_r_hat")),
            r_perfect=float(data["r_perfect"]),
            var_r_perfect=_optional_float(data.get("var_r_perfect")),
            m_hat=float(data["m_hat"]),
            var_m_hat=_optional_float(data.get("var_m_hat")),
            ci95_m=None if ci is None else (float(ci[0]), float(ci[1])),
            n_units=int(data["n_units"]),
            outcomes=[LifecycleOutcome.from_dict(item) for item in data.get("outcomes", [])],
            perfect_outcomes=[
                LifecycleOutcome.from_dict(item) for item in data.get("perfect_outcomes", [])
            ],
            ci_method=CiMethod(data.get("ci_method", CiMethod.NORMAL.value)),
            variance_clamped=bool(data.get("variance_clamped", False)),
            excluded_units=tuple(str(unit) for unit in data.get("excluded_units", [])),
        )


def _optional_float(value: Any) -> float | None:
    return None if value is None else float(value)


def _arrays(outcomes: Sequence[LifecycleOutcome]) -> tuple[FloatArray, FloatArray]:
    if not outcomes:
        raise InputError("cannot estimate a cost rate from an empty fleet")
    costs = np.asarray([outcome.c_m for outcome in outcomes], dtype=np.float64)
    lengths = np.asarray([outcome.t_lc for outcome in outcomes], dtype=np.float64)
    if np.any(lengths <= 0):
        raise DomainError("every life-cycle length must be positive")
    return costs, lengths


def renewal_ratio(outcomes: Sequence[LifecycleOutcome]) -> float:
    """Ratio of mean cost to mean life-cycle length."""
    costs, lengths = _arrays(outcomes)
    return float(costs.mean() / lengths.mean())


def _delta_variance(costs: FloatArray, lengths: FloatArray) -> tuple[float, bool]:
    n = costs.size
    if n < 2:
        raise InputError("the ratio variance needs at least two units")
    mean_c = float(costs.mean())
    mean_t = float(lengths.mean())
    var_c = float(costs.var(ddof=1))
    var_t = float(lengths.var(ddof=1))
    cov_ct = float(np.cov(costs, lengths, ddof=1)[0, 1])
    variance = (
        var_c / mean_t**2
        - 2.0 * mean_c * cov_ct / mean_t**3
        + mean_c**2 * var_t / mean_t**4
    ) / n
    if variance < 0:
        logger.warning("delta-method variance %.3g is negative; clamped to 0", variance)
        return 0.0, True
    return variance, False


def renewal_ratio_variance(outcomes: Sequence[LifecycleOutcome]) -> float:
    """First-order (delta-method) variance of :func:`renewal_ratio`."""
    costs, lengths = _arrays(outcomes)
    variance, _ = _delta_variance(costs, lengths)
    return variance


def _resampled_ratios(
    costs: FloatArray,
    lengths: FloatArray,
    n_resamples: int,
    rng: np.random.Generator,
) -> FloatArray:
    n = costs.size
    ratios = []
    remaining = n_resamples
    while remaining > 0:
        chunk = min(remaining, _BOOTSTRAP_CHUNK)
        index = rng.integers(0, n, size=(chunk, n))
        ratios.append(costs[index].mean(axis=1) / lengths[index].mean(axis=1))
        remaining -= chunk
    return np.concatenate(ratios)


def bootstrap_ratio_variance(
    outcomes: Sequence[LifecycleOutcome],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> float:
    """Nonparametric bootstrap variance of the renewal ratio."""
    if n_resamples < 2:
        raise DomainError("bootstrap needs at least two resamples")
    costs, lengths = _arrays(outcomes)
    ratios = _resampled_ratios(costs, lengths, n_resamples, np.random.default_rng(seed))
    return float(ratios.var(ddof=1))


def _aligned(
    outcomes: Sequence[LifecycleOutcome],
    perfect_outcomes: Sequence[LifecycleOutcome],
) -> tuple[list[LifecycleOutcome], list[LifecycleOutcome]]:
    policy_map = {outcome.unit_id: outcome for outcome in outcomes}
    perfect_map = {outcome.unit_id: outcome for outcome in perfect_outcomes}
    if len(policy_map) != len(outcomes) or len(perfect_map) != len(perfect_outcomes):
        raise InputError("outcome sets contain duplicate unit ids")
    if policy_map.keys() != perfect_map.keys():
        raise InputError("policy and perfect outcomes cover different units")
    order = sorted(policy_map)
    return [policy_map[key] for key in order], [perfect_map[key] for key in order]


def bootstrap_metric_interval(
    outcomes: Sequence[LifecycleOutcome],
    perfect_outcomes: Sequence[LifecycleOutcome],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile interval of the metric under paired resampling of units."""
    policy, perfect = _aligned(outcomes, perfect_outcomes)
    costs, lengths = _arrays(policy)
    perfect_costs, perfect_lengths = _arrays(perfect)
    rng = np.random.default_rng(seed)
    n = costs.size
    metrics = []
    remaining = n_resamples
    while remaining > 0:
        chunk = min(remaining, _BOOTSTRAP_CHUNK)
        index = rng.integers(0, n, size=(chunk, n))
        r_hat = costs[index].mean(axis=1) / lengths[index].mean(axis=1)
        r_perfect = perfect_costs[index].mean(axis=1) / perfect_lengths[index].mean(axis=1)
        metrics.append((r_hat - r_perfect) / r_perfect)
        remaining -= chunk
    values = np.concatenate(metrics)
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(values, [tail, 100.0 - tail])
    return float(lo), float(hi)


def metric(
    outcomes: Sequence[LifecycleOutcome],
    perfect_outcomes: Sequence[LifecycleOutcome],
    *,
    ci_method: CiMethod = CiMethod.NORMAL,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> FleetEvaluation:
    """Relative excess of the policy's cost rate over the perfect baseline."""
    policy, perfect = _aligned(outcomes, perfect_outcomes)
    costs, lengths = _arrays(policy)
    perfect_costs, perfect_lengths = _arrays(perfect)
    r_hat = float(costs.mean() / lengths.mean())
    r_perfect = float(perfect_costs.mean() / perfect_lengths.mean())
    if r_perfect <= 0:
        raise DomainError("perfect cost rate must be positive")
    m_hat = (r_hat - r_perfect) / r_perfect

    var_r_hat: float | None = None
    var_r_perfect: float | None = None
    var_m_hat: float | None = None
    ci: tuple[float, float] | None = None
    clamped = False
    if costs.size >= 2:
        var_r_hat, clamped = _delta_variance(costs, lengths)
        var_r_perfect, _ = _delta_variance(perfect_costs, perfect_lengths)
        var_m_hat = var_r_hat / r_perfect**2
        if ci_method is CiMethod.BOOTSTRAP:
            ci = bootstrap_metric_interval(policy, perfect, n_resamples=n_resamples, seed=seed)
        else:
            half_width = Z_95 * math.sqrt(var_m_hat)
            ci = (m_hat - half_width, m_hat + half_width)
    return FleetEvaluation(
        r_hat=r_hat,
        var_r_hat=var_r_hat,
        r_perfect=r_perfect,
        var_r_perfect=var_r_perfect,
        m_hat=m_hat,
        var_m_hat=var_m_hat,
        ci95_m=ci,
        n_units=costs.size,
        outcomes=policy,
        perfect_outcomes=perfect,
        ci_method=ci_method,
        variance_clamped=clamped,
    )


def metric_values(
    c_m: FloatArray,
    t_lc: FloatArray,
    r_perfect: float,
) -> FloatArray:
    """Metric for every column of unit-by-setting cost and length arrays."""
    r_hat = c_m.mean(axis=0) / t_lc.mean(axis=0)
    return np.asarray((r_hat - r_perfect) / r_perfect, dtype=np.float64)


@dataclass(frozen=True, slots=True)
class ConvergencePoint:
    n_units: int
    m_hat_mean: float
    m_hat_std: float
    delta_std: float


def metric_convergence(
    outcomes: Sequence[LifecycleOutcome],
    perfect_outcomes: Sequence[LifecycleOutcome],
    sizes: Iterable[int],
    n_repeats: int = 100,
    seed: int = 0,
) -> list[ConvergencePoint]:
    """Spread of the metric over random sub-fleets of increasing size.

    ``m_hat_std`` is the empirical spread across repeats, ``delta_std`` the
    mean delta-method standard deviation reported for a single sub-fleet.
    """
    policy, perfect = _aligned(outcomes, perfect_outcomes)
    costs, lengths = _arrays(policy)
    perfect_costs, perfect_lengths = _arrays(perfect)
    rng = np.random.default_rng(seed)
    points = []
    for size in sizes:
        if not 2 <= size <= costs.size:
            raise DomainError(f"sub-fleet size {size} must lie in [2, {costs.size}]")
        metrics = np.empty(n_repeats)
        deltas = np.empty(n_repeats)
        for repeat in range(n_repeats):
            index = rng.choice(costs.size, size=size, replace=False)
            r_perfect = float(perfect_costs[index].mean() / perfect_lengths[index].mean())
            r_hat = float(costs[index].mean() / lengths[index].mean())
            variance, _ = _delta_variance(costs[index], lengths[index])
            metrics[repeat] = (r_hat - r_perfect) / r_perfect
            deltas[repeat] = math.sqrt(variance) / r_perfect
        points.append(
            ConvergencePoint(
                n_units=size,
                m_hat_mean=float(metrics.mean()),
                m_hat_std=float(metrics.std(ddof=1)) if n_repeats > 1 else 0.0,
                delta_std=float(deltas.mean()),
            ),
        )
    return points


def perfect_fleet(
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    setting: Setting,
    *,
    allow_failure: bool = False,
) -> tuple[list[LifecycleOutcome], tuple[str, ...]]:
    """Perfect-baseline outcomes plus the units excluded as infeasible."""
    outcomes = []
    excluded = []
    for truth in sorted(truths, key=lambda item: item.unit_id):
        if setting is Setting.REPLACEMENT:
            outcomes.append(
                perfect_outcome_replacement(truth, grid, costs, allow_failure=allow_failure),
            )
            continue
        try:
            outcomes.append(perfect_outcome_ordering(truth, grid, costs))
        except InfeasiblePerfectError as exc:
            logger.warning("excluding unit: %s", exc)
            excluded.append(truth.unit_id)
    return outcomes, tuple(excluded)


def evaluate_setting(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
    grid: TimeGrid,
    costs: CostModel,
    setting: Setting,
    *,
    policy: ReplacementPolicy | None = None,
    ordering: OrderingPolicyParams | None = None,
    allow_failure: bool = False,
    ci_method: CiMethod = CiMethod.NORMAL,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> FleetEvaluation:
    """Run a policy over a fleet and compare it with the perfect baseline."""
    pairs = pair_fleet(traces, truths)
    perfect, excluded = perfect_fleet(
        (truth for _, truth in pairs),
        grid,
        costs,
        setting,
        allow_failure=allow_failure,
    )
    skip = set(excluded)
    outcomes = []
    for trace, truth in pairs:
        if truth.unit_id in skip:
            continue
        if setting is Setting.REPLACEMENT:
            if policy is None:
                raise DomainError("the replacement setting needs a replacement policy")
            outcomes.append(run_replacement_policy_on_unit(trace, truth, grid, costs, policy))
        else:
            if ordering is None:
                raise DomainError("the ordering setting needs ordering thresholds")
            outcomes.append(run_ordering_policy_on_unit(trace, truth, grid, costs, ordering))
    if not outcomes:
        raise InputError("no units left to evaluate")
    evaluation = metric(
        outcomes,
        perfect,
        ci_method=ci_method,
        n_resamples=n_resamples,
        seed=seed,
    )
    evaluation.excluded_units = excluded
    return evaluation


__all__ = [
    "CiMethod",
    "ConvergencePoint",
    "FleetEvaluation",
    "Setting",
    "bootstrap_metric_interval",
    "bootstrap_ratio_variance",
    "evaluate_setting",
    "metric",
    "metric_convergence",
    "metric_values",
    "perfect_fleet",
    "renewal_ratio",
    "renewal_ratio_variance",
]
