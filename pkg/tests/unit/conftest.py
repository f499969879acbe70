from __future__ import annotations

from pathlib import Path

import pytest

from pdmeval.core import CostModel, PredictionTrace, TimeGrid, UnitTruth
from pdmeval.io import write_traces, write_truths
from pdmeval.simulator import SimulatorConfig, perfect_traces, sample_fleet

Fleet = tuple[list[UnitTruth], list[PredictionTrace]]


@pytest.fixture  # type: ignore[misc]
def grid() -> TimeGrid:
    return TimeGrid(delta_t=10.0, max_steps=60)


@pytest.fixture  # type: ignore[misc]
def costs() -> CostModel:
    return CostModel(c_p=10.0, c_c=100.0)


@pytest.fixture  # type: ignore[misc]
def ordering_costs() -> CostModel:
    return CostModel(c_p=100.0, c_c=1000.0, c_unav=10.0, c_inv=1.0, lead_time=20.0)


@pytest.fixture  # type: ignore[misc]
def sim_config() -> SimulatorConfig:
    return SimulatorConfig(
        mu_tf=225.0,
        sigma_tf=40.0,
        grid=TimeGrid.covering(10.0, 225.0 + 6 * 40.0),
        sigma_ln_eps=0.4,
        corr_length=50.0,
        n_units=40,
        seed=7,
    )


@pytest.fixture  # type: ignore[misc]
def sim_config_grid(sim_config: SimulatorConfig) -> TimeGrid:
    return sim_config.grid


@pytest.fixture  # type: ignore[misc]
def fleet(sim_config: SimulatorConfig) -> Fleet:
    return sample_fleet(sim_config)


@pytest.fixture  # type: ignore[misc]
def perfect_fleet_traces(fleet: Fleet, sim_config: SimulatorConfig) -> Fleet:
    truths, _ = fleet
    return truths, perfect_traces(truths, sim_config.grid)


@pytest.fixture  # type: ignore[misc]
def fleet_files(tmp_path: Path, fleet: Fleet) -> tuple[Path, Path]:
    """Simulated fleet written to disk as (traces, truths)."""
    truths, traces = fleet
    traces_path = tmp_path / "traces.ndjson"
    truths_path = tmp_path / "truths.csv"
    write_traces(traces, traces_path)
    write_truths(truths, truths_path)
    return traces_path, truths_path


@pytest.fixture  # type: ignore[misc]
def perfect_files(tmp_path: Path, perfect_fleet_traces: Fleet) -> tuple[Path, Path]:
    truths, traces = perfect_fleet_traces
    traces_path = tmp_path / "perfect.ndjson"
    truths_path = tmp_path / "truths.csv"
    write_traces(traces, traces_path)
    write_truths(truths, truths_path)
    return traces_path, truths_path


@pytest.fixture(autouse=True)  # type: ignore[misc]
def patch_console_width(monkeypatch: pytest.MonkeyPatch) -> None:
    """Patch the console width to prevent truncation in tests."""
    monkeypatch.setattr("pdmeval.cli.console.width", 1000)
