"""Virtual RUL simulator: synthetic failure times with correlated lognormal predictions."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any

import numpy as np

from .core import FloatArray, LogNormal, PointMass, PredictionTrace, TimeGrid, UnitTruth
from .errors import ConfigError, DomainError, NumericalError

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-10
MAX_REDRAWS = 10_000
DEFAULT_HORIZON_SIGMAS = 6.0


@dataclass(frozen=True, slots=True)
class SimulatorConfig:
    mu_tf: float
    sigma_tf: float
    grid: TimeGrid
    sigma_ln_eps: float
    corr_length: float
    n_units: int
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("mu_tf", "sigma_tf", "sigma_ln_eps", "corr_length"):
            value = getattr(self, name)
            if not isinstance(value, int | float) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if self.sigma_tf <= 0:
            raise ConfigError("sigma_tf must be positive")
        if self.sigma_ln_eps <= 0:
            raise ConfigError("sigma_ln_eps must be positive")
        if self.corr_length <= 0:
            raise ConfigError("corr_length must be positive")
        if int(self.n_units) < 1:
            raise ConfigError("n_units must be at least 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be a non-negative integer")
        object.__setattr__(self, "n_units", int(self.n_units))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimulatorConfig:
        """Build a config from a ``[simulator]`` table.

        ``max_steps`` defaults to a grid reaching six population standard
        deviations beyond the mean failure time.
        """
        try:
            mu_tf = float(data["mu_tf"])
            sigma_tf = float(data["sigma_tf"])
            delta_t = float(data["delta_t"])
            sigma_ln_eps = float(data["sigma_ln_eps"])
            corr_length = float(data["corr_length"])
            n_units = int(data["n_units"])
        except KeyError as exc:
            raise ConfigError(f"[simulator] is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[simulator] has a malformed value: {exc}") from None
        try:
            if "max_steps" in data:
                grid = TimeGrid(delta_t=delta_t, max_steps=int(data["max_steps"]))
            else:
                grid = TimeGrid.covering(delta_t, mu_tf + DEFAULT_HORIZON_SIGMAS * sigma_tf)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        return cls(
            mu_tf=mu_tf,
            sigma_tf=sigma_tf,
            grid=grid,
            sigma_ln_eps=sigma_ln_eps,
            corr_length=corr_length,
            n_units=n_units,
            seed=int(data.get("seed", 0)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "mu_tf": self.mu_tf,
            "sigma_tf": self.sigma_tf,
            "delta_t": self.grid.delta_t,
            "max_steps": self.grid.max_steps,
            "sigma_ln_eps": self.sigma_ln_eps,
            "corr_length": self.corr_length,
            "n_units": self.n_units,
            "seed": self.seed,
        }

    def with_overrides(self, **changes: Any) -> SimulatorConfig:
        return replace(self, **{key: value for key, value in changes.items() if value is not None})


def exponential_correlation_matrix(times: Sequence[float] | FloatArray, l: float) -> FloatArray:
    """rho_ij = exp(-|t_i - t_j| / l)."""
    if not (math.isfinite(l) and l > 0):
        raise DomainError(f"correlation length must be positive, got {l}")
    t = np.asarray(times, dtype=np.float64)
    if np.unique(t).size != t.size:
        raise DomainError("correlation times must be distinct")
    return np.exp(-np.abs(t[:, None] - t[None, :]) / l)


def cholesky_with_jitter(matrix: FloatArray) -> FloatArray:
    """Lower Cholesky factor, retrying once with a small diagonal jitter."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        n = matrix.shape[0]
        jitter = JITTER_SCALE * float(np.trace(matrix)) / n
        logger.warning("Cholesky factorization failed; retrying with jitter %.3g", jitter)
        try:
            return np.linalg.cholesky(matrix + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("covariance matrix is not positive definite") from exc


@lru_cache(maxsize=32)
def _correlation_factor(times: tuple[float, ...], corr_length: float) -> FloatArray:
    factor = cholesky_with_jitter(exponential_correlation_matrix(times, corr_length))
    factor.flags.writeable = False
    return factor


def sample_log_error_path(
    config: SimulatorConfig,
    times: Sequence[float] | FloatArray,
    rng: np.random.Generator,
) -> FloatArray:
    """Draw [ln eps_1, ..., ln eps_n] ~ MVN(0, D R D) with D = sigma_ln_eps * I."""
    factor = _correlation_factor(tuple(float(t) for t in times), float(config.corr_length))
    z = rng.standard_normal(factor.shape[0])
    return config.sigma_ln_eps * (factor @ z)


def _draw_failure_time(config: SimulatorConfig, rng: np.random.Generator) -> float:
    for _ in range(MAX_REDRAWS):
        failure_time = float(rng.normal(config.mu_tf, config.sigma_tf))
        if failure_time > config.grid.delta_t:
            return failure_time
    raise NumericalError(
        f"could not draw a failure time above delta_t={config.grid.delta_t} "
        f"in {MAX_REDRAWS} attempts",
    )


def generate_unit(
    config: SimulatorConfig,
    unit_id: str,
    rng: np.random.Generator,
) -> tuple[UnitTruth, PredictionTrace]:
    """Draw one run-to-failure unit and its prediction trace.

    The failure time is drawn first, then one log-error path over the full
    grid; only steps strictly before failure are kept.
    """
    grid = config.grid
    failure_time = _draw_failure_time(config, rng)
    times = grid.times()
    log_errors = sample_log_error_path(config, times, rng)
    entries = []
    for step in grid.decision_steps(failure_time):
        t_k = grid.time(step)
        mu = math.log(failure_time - t_k) + float(log_errors[step - 1])
        entries.append((t_k, LogNormal(mu=mu, sigma=config.sigma_ln_eps)))
    truth = UnitTruth(unit_id=unit_id, failure_time=failure_time)
    return truth, PredictionTrace(unit_id=unit_id, entries=tuple(entries))


def unit_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for unit ``index`` of a fleet seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def unit_ids(n_units: int) -> list[str]:
    width = len(str(max(n_units - 1, 0)))
    return [f"u{index:0{width}d}" for index in range(n_units)]


def sample_fleet(config: SimulatorConfig) -> tuple[list[UnitTruth], list[PredictionTrace]]:
    truths: list[UnitTruth] = []
    traces: list[PredictionTrace] = []
    for index, unit_id in enumerate(unit_ids(config.n_units)):
        truth, trace = generate_unit(config, unit_id, unit_rng(config.seed, index))
        truths.append(truth)
        traces.append(trace)
    logger.info(
        "sampled %d units (seed=%d, sigma_ln_eps=%g)",
        config.n_units,
        config.seed,
        config.sigma_ln_eps,
    )
    return truths, traces


def perfect_traces(truths: Iterable[UnitTruth], grid: TimeGrid) -> list[PredictionTrace]:
    """Point-mass traces at the true RUL: what a perfect prognostic would emit."""
    traces = []
    for truth in truths:
        entries = tuple(
            (grid.time(step), PointMass(value=truth.failure_time - grid.time(step)))
            for step in grid.decision_steps(truth.failure_time)
        )
        traces.append(PredictionTrace(unit_id=truth.unit_id, entries=entries))
    return traces


__all__ = [
    "SimulatorConfig",
    "cholesky_with_jitter",
    "exponential_correlation_matrix",
    "generate_unit",
    "perfect_traces",
    "sample_fleet",
    "sample_log_error_path",
    "unit_ids",
    "unit_rng",
]
