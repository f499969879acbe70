"""Domain types and the RUL distribution calculus shared by every policy."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, ClassVar, TypeAlias, overload

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr, ndtri

from .errors import ConfigError, DegenerateFitError, DomainError, InputError

FloatArray: TypeAlias = NDArray[np.float64]

GRID_TOLERANCE = 1e-9
WEIGHT_TOLERANCE = 1e-9
CDF_CLAMP_EPS = 1e-6


def _finite(value: Any, *, name: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(number):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return number


@dataclass(frozen=True, slots=True)
class TimeGrid:
    """Decision grid t_k = k * delta_t for k = 1..max_steps."""

    delta_t: float
    max_steps: int

    def __post_init__(self) -> None:
        delta_t = _finite(self.delta_t, name="delta_t")
        if delta_t <= 0:
            raise DomainError("delta_t must be positive")
        if int(self.max_steps) < 1:
            raise DomainError("max_steps must be at least 1")
        object.__setattr__(self, "delta_t", delta_t)
        object.__setattr__(self, "max_steps", int(self.max_steps))

    @classmethod
    def covering(cls, delta_t: float, horizon: float) -> TimeGrid:
        """Smallest grid whose last decision time reaches ``horizon``."""
        if not (math.isfinite(delta_t) and delta_t > 0):
            raise DomainError("delta_t must be positive")
        steps = max(1, math.ceil(horizon / delta_t - GRID_TOLERANCE))
        return cls(delta_t=delta_t, max_steps=steps)

    @property
    def horizon(self) -> float:
        return self.max_steps * self.delta_t

    def time(self, step: int) -> float:
        return step * self.delta_t

    def times(self) -> FloatArray:
        return np.arange(1, self.max_steps + 1, dtype=np.float64) * self.delta_t

    def step_index(self, t: float) -> int:
        """Return k with t == k * delta_t, rejecting off-grid times."""
        ratio = t / self.delta_t
        step = round(ratio)
        if abs(ratio - step) > GRID_TOLERANCE or step < 1:
            raise DomainError(f"time {t!r} is not on the decision grid (delta_t={self.delta_t})")
        return step

    def last_step_before(self, failure_time: float) -> int:
        """Index of the last grid time strictly below ``failure_time`` (0 if none)."""
        return math.ceil(failure_time / self.delta_t - GRID_TOLERANCE) - 1

    def decision_steps(self, failure_time: float) -> range:
        """Steps at which a unit failing at ``failure_time`` is still decidable."""
        return range(1, min(self.last_step_before(failure_time), self.max_steps) + 1)


@dataclass(frozen=True, slots=True)
class CostModel:
    c_p: float
    c_c: float
    c_unav: float = 0.0
    c_inv: float = 0.0
    lead_time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("c_p", "c_c", "c_unav", "c_inv", "lead_time"):
            try:
                object.__setattr__(self, name, _finite(getattr(self, name), name=name))
            except DomainError as exc:
                raise ConfigError(str(exc)) from None
        if not self.c_p > 0:
            raise ConfigError("c_p must be positive")
        if not self.c_c > self.c_p:
            raise ConfigError("c_c must exceed c_p")
        if self.c_unav < 0 or self.c_inv < 0 or self.lead_time < 0:
            raise ConfigError("c_unav, c_inv and lead_time must be non-negative")

    @property
    def ratio(self) -> float:
        return self.c_p / self.c_c

    def with_ratio(self, ratio: float) -> CostModel:
        """Return a copy with c_c set so that c_p / c_c == ratio."""
        if not 0 < ratio < 1:
            raise ConfigError(f"cost ratio must lie in (0, 1), got {ratio}")
        return replace(self, c_c=self.c_p / ratio)

    def with_corrective(self, c_c: float) -> CostModel:
        return replace(self, c_c=c_c)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CostModel:
        try:
            return cls(
                c_p=data["c_p"],
                c_c=data["c_c"],
                c_unav=data.get("c_unav", 0.0),
                c_inv=data.get("c_inv", 0.0),
                lead_time=data.get("lead_time", 0.0),
            )
        except KeyError as exc:
            raise ConfigError(f"cost model is missing {exc.args[0]!r}") from None

    def to_dict(self) -> dict[str, float]:
        return {
            "c_p": self.c_p,
            "c_c": self.c_c,
            "c_unav": self.c_unav,
            "c_inv": self.c_inv,
            "lead_time": self.lead_time,
        }


class DistributionKind(str, Enum):
    LOGNORMAL = "lognormal"
    POINT_MASS = "point_mass"
    WEIGHTED_SAMPLES = "weighted_samples"
    CDF_POINTS = "cdf_points"


@dataclass(frozen=True, slots=True)
class LogNormal:
    """ln(RUL) ~ N(mu, sigma)."""

    mu: float
    sigma: float
    kind: ClassVar[DistributionKind] = DistributionKind.LOGNORMAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", _finite(self.mu, name="mu"))
        sigma = _finite(self.sigma, name="sigma")
        if sigma <= 0:
            raise DomainError("lognormal sigma must be positive")
        object.__setattr__(self, "sigma", sigma)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True, slots=True)
class PointMass:
    value: float
    kind: ClassVar[DistributionKind] = DistributionKind.POINT_MASS

    def __post_init__(self) -> None:
        value = _finite(self.value, name="value")
        if value < 0:
            raise DomainError("point mass value must be non-negative")
        object.__setattr__(self, "value", value)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "value": self.value}


@dataclass(frozen=True, slots=True)
class WeightedSamples:
    """Particle representation: values y_i with weights w_i."""

    values: tuple[float, ...]
    weights: tuple[float, ...]
    kind: ClassVar[DistributionKind] = DistributionKind.WEIGHTED_SAMPLES

    def __post_init__(self) -> None:
        values = tuple(_finite(v, name="sample value") for v in self.values)
        weights = tuple(_finite(w, name="sample weight") for w in self.weights)
        if not values:
            raise DomainError("weighted samples need at least one value")
        if len(values) != len(weights):
            raise DomainError("values and weights must have the same length")
        if any(v < 0 for v in values):
            raise DomainError("sample values must be non-negative")
        if any(w < 0 for w in weights):
            raise DomainError("sample weights must be non-negative")
        if abs(math.fsum(weights) - 1.0) > WEIGHT_TOLERANCE:
            raise DomainError("sample weights must sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def arrays(self) -> tuple[FloatArray, FloatArray]:
        return np.asarray(self.values, dtype=np.float64), np.asarray(self.weights, dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "values": list(self.values), "weights": list(self.weights)}


@dataclass(frozen=True, slots=True)
class CdfPoints:
    """Known CDF values at increasing thresholds, interpolated linearly.

    Below the first threshold the CDF is held at the first probability (an atom
    at zero); beyond the last threshold the remaining mass has no location.
    """

    points: tuple[tuple[float, float], ...]
    kind: ClassVar[DistributionKind] = DistributionKind.CDF_POINTS

    def __post_init__(self) -> None:
        points = tuple(
            (_finite(t, name="threshold"), _finite(p, name="probability")) for t, p in self.points
        )
        if not points:
            raise DomainError("cdf_points needs at least one point")
        previous_t, previous_p = -math.inf, 0.0
        for threshold, prob in points:
            if threshold < 0:
                raise DomainError("cdf thresholds must be non-negative")
            if not 0.0 <= prob <= 1.0:
                raise DomainError("cdf probabilities must lie in [0, 1]")
            if threshold <= previous_t:
                raise DomainError("cdf thresholds must be strictly increasing")
            if prob < previous_p:
                raise DomainError("cdf probabilities must be nondecreasing")
            previous_t, previous_p = threshold, prob
        object.__setattr__(self, "points", points)

    def arrays(self) -> tuple[FloatArray, FloatArray]:
        thresholds = np.asarray([t for t, _ in self.points], dtype=np.float64)
        probs = np.asarray([p for _, p in self.points], dtype=np.float64)
        return thresholds, probs

    def probability_at(self, threshold: float) -> float | None:
        """Stored probability at exactly ``threshold`` (relative tolerance), if any."""
        for t, p in self.points:
            if math.isclose(t, threshold, rel_tol=GRID_TOLERANCE, abs_tol=GRID_TOLERANCE):
                return p
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "points": [[t, p] for t, p in self.points]}


RulDistribution: TypeAlias = LogNormal | PointMass | WeightedSamples | CdfPoints


def distribution_from_dict(data: Mapping[str, Any]) -> RulDistribution:
    try:
        kind = DistributionKind(data["kind"])
    except KeyError:
        raise DomainError("distribution is missing 'kind'") from None
    except ValueError:
        raise DomainError(f"unknown distribution kind: {data['kind']!r}") from None
    try:
        if kind is DistributionKind.LOGNORMAL:
            return LogNormal(mu=data["mu"], sigma=data["sigma"])
        if kind is DistributionKind.POINT_MASS:
            return PointMass(value=data["value"])
        if kind is DistributionKind.WEIGHTED_SAMPLES:
            return WeightedSamples(values=tuple(data["values"]), weights=tuple(data["weights"]))
        return CdfPoints(points=tuple((t, p) for t, p in data["points"]))
    except DomainError:
        raise
    except KeyError as exc:
        raise DomainError(f"{kind.value} distribution is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise DomainError(f"malformed {kind.value} payload: {exc}") from None


def _nonnegative(x: float | FloatArray, *, name: str) -> FloatArray:
    array = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(array)) or np.any(array < 0):
        raise DomainError(f"{name} must be non-negative")
    return array


@overload
def _shaped(result: FloatArray, like: float) -> float: ...
@overload
def _shaped(result: FloatArray, like: FloatArray) -> FloatArray: ...
def _shaped(result: FloatArray, like: float | FloatArray) -> float | FloatArray:
    if np.ndim(like) == 0:
        return float(result)
    return np.asarray(result, dtype=np.float64)


@overload
def prob_rul_leq(dist: RulDistribution, x: float) -> float: ...
@overload
def prob_rul_leq(dist: RulDistribution, x: FloatArray) -> FloatArray: ...
def prob_rul_leq(dist: RulDistribution, x: float | FloatArray) -> float | FloatArray:
    """P(RUL <= x) under the given representation."""
    xs = _nonnegative(x, name="x")
    match dist:
        case LogNormal(mu=mu, sigma=sigma):
            with np.errstate(divide="ignore"):
                result = ndtr((np.log(xs) - mu) / sigma)
        case PointMass(value=value):
            result = (value <= xs).astype(np.float64)
        case WeightedSamples():
            values, weights = dist.arrays()
            result = np.sum(weights * (values <= xs[..., None]), axis=-1)
        case CdfPoints():
            thresholds, probs = dist.arrays()
            result = np.interp(xs, thresholds, probs)
    return _shaped(result, x)


def _cdf_segment_moment(dist: CdfPoints, upper: FloatArray) -> FloatArray:
    thresholds, probs = dist.arrays()
    if thresholds.size < 2:
        return np.zeros_like(upper)
    lo, hi = thresholds[:-1], thresholds[1:]
    density = (probs[1:] - probs[:-1]) / (hi - lo)
    top = np.clip(upper[..., None], lo, hi)
    return np.sum(density * (top**2 - lo**2) / 2.0, axis=-1)


@overload
def truncated_mean_below(dist: RulDistribution, T: float) -> float: ...
@overload
def truncated_mean_below(dist: RulDistribution, T: FloatArray) -> FloatArray: ...
def truncated_mean_below(dist: RulDistribution, T: float | FloatArray) -> float | FloatArray:
    """Partial first moment: integral of u * f(u) over [0, T]."""
    ts = _nonnegative(T, name="T")
    match dist:
        case LogNormal(mu=mu, sigma=sigma):
            full = math.exp(mu + sigma * sigma / 2.0)
            with np.errstate(divide="ignore"):
                result = full * ndtr((np.log(ts) - mu - sigma * sigma) / sigma)
        case PointMass(value=value):
            result = np.where(value <= ts, value, 0.0)
        case WeightedSamples():
            values, weights = dist.arrays()
            result = np.sum(weights * values * (values <= ts[..., None]), axis=-1)
        case CdfPoints():
            result = _cdf_segment_moment(dist, ts)
    return _shaped(np.asarray(result, dtype=np.float64), T)


def mean(dist: RulDistribution) -> float:
    match dist:
        case LogNormal(mu=mu, sigma=sigma):
            return math.exp(mu + sigma * sigma / 2.0)
        case PointMass(value=value):
            return value
        case WeightedSamples():
            values, weights = dist.arrays()
            return float(np.dot(values, weights))
        case CdfPoints():
            thresholds, probs = dist.arrays()
            if probs[-1] < 1.0 - WEIGHT_TOLERANCE:
                raise DomainError("cdf_points leaves tail mass beyond its last threshold")
            return truncated_mean_below(dist, float(thresholds[-1]))


@overload
def expected_exceedance(dist: RulDistribution, T: float) -> float: ...
@overload
def expected_exceedance(dist: RulDistribution, T: FloatArray) -> FloatArray: ...
def expected_exceedance(dist: RulDistribution, T: float | FloatArray) -> float | FloatArray:
    """E[(RUL - T)+]: expected life beyond T."""
    ts = _nonnegative(T, name="T")
    if isinstance(dist, LogNormal):
        mu, sigma = dist.mu, dist.sigma
        full = math.exp(mu + sigma * sigma / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_t = np.log(ts)
            above = ndtr((mu - log_t) / sigma)
            result = full * ndtr((mu + sigma * sigma - log_t) / sigma) - np.where(
                ts > 0,
                ts * above,
                0.0,
            )
        return _shaped(np.maximum(result, 0.0), T)
    survival = 1.0 - np.asarray(prob_rul_leq(dist, ts))
    partial = np.asarray(truncated_mean_below(dist, ts))
    result = mean(dist) - partial - ts * survival
    return _shaped(np.maximum(result, 0.0), T)


def quantile(dist: RulDistribution, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError("quantile level must lie in (0, 1)")
    match dist:
        case LogNormal(mu=mu, sigma=sigma):
            return math.exp(mu + sigma * float(ndtri(q)))
        case PointMass(value=value):
            return value
        case WeightedSamples():
            values, weights = dist.arrays()
            order = np.argsort(values, kind="stable")
            cumulative = np.cumsum(weights[order])
            index = int(np.searchsorted(cumulative, q - WEIGHT_TOLERANCE, side="left"))
            return float(values[order][min(index, values.size - 1)])
        case CdfPoints():
            thresholds, probs = dist.arrays()
            if q <= probs[0]:
                return 0.0
            if q > probs[-1]:
                return float(thresholds[-1])
            index = int(np.searchsorted(probs, q, side="left"))
            lo, hi = thresholds[index - 1], thresholds[index]
            p_lo, p_hi = probs[index - 1], probs[index]
            return float(lo + (q - p_lo) / (p_hi - p_lo) * (hi - lo))


def fit_lognormal_from_two_cdf_points(a: float, p_a: float, b: float, p_b: float) -> LogNormal:
    """Lognormal passing through (a, p_a) and (b, p_b)."""
    if not 0 < a < b:
        raise DomainError(f"need 0 < a < b, got a={a}, b={b}")
    for name, prob in (("p_a", p_a), ("p_b", p_b)):
        if not 0.0 <= prob <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1]")
    clamped_a = min(max(p_a, CDF_CLAMP_EPS), 1.0 - CDF_CLAMP_EPS)
    clamped_b = min(max(p_b, CDF_CLAMP_EPS), 1.0 - CDF_CLAMP_EPS)
    if clamped_a >= clamped_b:
        raise DegenerateFitError(
            f"CDF points ({a}, {p_a}) and ({b}, {p_b}) do not increase after clamping",
        )
    z_a, z_b = float(ndtri(clamped_a)), float(ndtri(clamped_b))
    sigma = (math.log(b) - math.log(a)) / (z_b - z_a)
    return LogNormal(mu=math.log(a) - sigma * z_a, sigma=sigma)


def lognormal_from_cdf_points(dist: CdfPoints) -> LogNormal:
    """Two-point lognormal fit through the first two positive thresholds."""
    usable = [(t, p) for t, p in dist.points if t > 0]
    if len(usable) < 2:
        raise DegenerateFitError("a lognormal fit needs two CDF points above zero")
    (a, p_a), (b, p_b) = usable[0], usable[1]
    return fit_lognormal_from_two_cdf_points(a, p_a, b, p_b)


def distribution_from_class_probabilities(
    boundaries: Sequence[float],
    class_probs: Sequence[float],
) -> CdfPoints:
    """CDF points from a multiclass RUL classifier.

    Class i covers (boundaries[i-1], boundaries[i]]; the last class is open-ended.
    """
    if len(class_probs) != len(boundaries) + 1:
        raise DomainError("expected one more class probability than boundaries")
    if any(p < 0 for p in class_probs) or abs(math.fsum(class_probs) - 1.0) > 1e-6:
        raise DomainError("class probabilities must be non-negative and sum to 1")
    cumulative = np.minimum(np.cumsum(np.asarray(class_probs[:-1], dtype=np.float64)), 1.0)
    return CdfPoints(points=tuple(zip(map(float, boundaries), map(float, cumulative))))


@dataclass(frozen=True, slots=True)
class UnitTruth:
    unit_id: str
    failure_time: float

    def __post_init__(self) -> None:
        failure_time = _finite(self.failure_time, name="failure_time")
        if failure_time <= 0:
            raise DomainError(f"unit {self.unit_id}: failure_time must be positive")
        object.__setattr__(self, "failure_time", failure_time)

    def rul_at(self, t: float) -> float:
        return self.failure_time - t


@dataclass(frozen=True, slots=True)
class PredictionTrace:
    """RUL predictions of one unit, ordered by decision time."""

    unit_id: str
    entries: tuple[tuple[float, RulDistribution], ...]

    def __post_init__(self) -> None:
        entries = tuple((_finite(t, name="t"), dist) for t, dist in self.entries)
        previous = -math.inf
        for t, _ in entries:
            if t <= previous:
                raise DomainError(f"unit {self.unit_id}: entry times must be strictly increasing")
            previous = t
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.entries)

    def by_step(self, grid: TimeGrid) -> dict[int, RulDistribution]:
        """Index entries by grid step, rejecting off-grid times."""
        return {grid.step_index(t): dist for t, dist in self.entries}

    def map_distributions(self, func: Any) -> PredictionTrace:
        return PredictionTrace(
            unit_id=self.unit_id,
            entries=tuple((t, func(dist)) for t, dist in self.entries),
        )


class ReplacementKind(str, Enum):
    PREVENTIVE = "preventive"
    CORRECTIVE = "corrective"


@dataclass(frozen=True, slots=True)
class LifecycleOutcome:
    """What a policy did to one unit over its life-cycle."""

    unit_id: str
    t_lc: float
    replacement_kind: ReplacementKind
    c_rep: float
    t_order: float | None = None
    c_delay: float = 0.0
    c_stock: float = 0.0

    @property
    def c_m(self) -> float:
        return self.c_rep + self.c_delay + self.c_stock

    def to_dict(self) -> dict[str, Any]:
        return {
            "unit_id": self.unit_id,
            "t_lc": self.t_lc,
            "replacement_kind": self.replacement_kind.value,
            "c_rep": self.c_rep,
            "t_order": self.t_order,
            "c_delay": self.c_delay,
            "c_stock": self.c_stock,
            "c_m": self.c_m,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LifecycleOutcome:
        t_order = data.get("t_order")
        return cls(
            unit_id=str(data["unit_id"]),
            t_lc=float(data["t_lc"]),
            replacement_kind=ReplacementKind(data["replacement_kind"]),
            c_rep=float(data["c_rep"]),
            t_order=None if t_order is None else float(t_order),
            c_delay=float(data.get("c_delay", 0.0)),
            c_stock=float(data.get("c_stock", 0.0)),
        )


def pair_fleet(
    traces: Iterable[PredictionTrace],
    truths: Iterable[UnitTruth],
) -> list[tuple[PredictionTrace, UnitTruth]]:
    """Match traces with truths by unit_id, ordered by unit_id."""
    trace_map = {trace.unit_id: trace for trace in traces}
    truth_map = {truth.unit_id: truth for truth in truths}
    missing_traces = sorted(truth_map.keys() - trace_map.keys())
    missing_truths = sorted(trace_map.keys() - truth_map.keys())
    if missing_traces or missing_truths:
        parts = []
        if missing_traces:
            parts.append("no trace for: " + ", ".join(missing_traces[:5]))
        if missing_truths:
            parts.append("no truth for: " + ", ".join(missing_truths[:5]))
        raise InputError("traces and truths do not cover the same units (" + "; ".join(parts) + ")")
    return [(trace_map[unit_id], truth_map[unit_id]) for unit_id in sorted(truth_map)]


__all__ = [
    "CDF_CLAMP_EPS",
    "CdfPoints",
    "CostModel",
    "DistributionKind",
    "LifecycleOutcome",
    "LogNormal",
    "PointMass",
    "PredictionTrace",
    "ReplacementKind",
    "RulDistribution",
    "TimeGrid",
    "UnitTruth",
    "WeightedSamples",
    "distribution_from_class_probabilities",
    "distribution_from_dict",
    "expected_exceedance",
    "fit_lognormal_from_two_cdf_points",
    "lognormal_from_cdf_points",
    "mean",
    "pair_fleet",
    "prob_rul_leq",
    "quantile",
    "truncated_mean_below",
]
