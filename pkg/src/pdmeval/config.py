from __future__ import annotations

import logging
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import CostModel
from .errors import ConfigError
from .simulator import SimulatorConfig
from .utils import find_up

logger = logging.getLogger(__name__)

STUDY_FILENAME = "pdmeval.toml"


@dataclass(frozen=True, slots=True)
class Config:
    """``[tool.pdmeval]`` settings from the nearest pyproject.toml."""

    project_root: Path | None = None
    study_path: Path | None = None

    @classmethod
    def from_table(cls, table: Mapping[str, Any], *, project_root: Path) -> Config:
        study = table.get("study")
        if not isinstance(study, str) or not study:
            return cls(project_root=project_root)
        return cls(project_root=project_root, study_path=(project_root / study).resolve())


@dataclass(slots=True)
class Study:
    """A study file: simulator settings plus optional default costs."""

    simulator: SimulatorConfig
    costs: CostModel | None = None
    source: Path | None = None


def _read_toml(path: Path) -> dict[str, Any]:
    with path.open("rb") as handle:
        return tomllib.load(handle)


def load_config(start_dir: Path | None = None) -> Config:
    """Settings from ``[tool.pdmeval]``; an unreadable pyproject.toml counts as absent."""
    pyproject = find_up("pyproject.toml", start_dir)
    if pyproject is None:
        return Config()
    try:
        tool = _read_toml(pyproject).get("tool", {})
    except (OSError, tomllib.TOMLDecodeError):
        return Config()
    table = tool.get("pdmeval") if isinstance(tool, dict) else None
    if not isinstance(table, dict):
        table = {}
    return Config.from_table(table, project_root=pyproject.parent)


def load_study(path: Path) -> Study:
    """Parse a study TOML file with a ``[simulator]`` and optional ``[costs]`` table."""
    try:
        data = _read_toml(path)
    except OSError as exc:
        raise ConfigError(f"cannot read study file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    simulator = data.get("simulator")
    if not isinstance(simulator, dict):
        raise ConfigError(f"{path}: missing [simulator] table")
    costs = data.get("costs")
    if costs is not None and not isinstance(costs, dict):
        raise ConfigError(f"{path}: [costs] must be a table")
    return Study(
        simulator=SimulatorConfig.from_dict(simulator),
        costs=CostModel.from_dict(costs) if costs is not None else None,
        source=path,
    )


def find_study_path(explicit: Path | None, config: Config | None = None) -> Path | None:
    """Locate the study file, or None when there is none to find.

    Order: the explicit flag, then ``[tool.pdmeval].study``, then the nearest
    ``pdmeval.toml`` in the current directory or its parents.
    """
    if explicit is not None:
        return explicit
    config = config if config is not None else load_config()
    if config.study_path is not None:
        return config.study_path
    return find_up(STUDY_FILENAME)


def resolve_study_path(explicit: Path | None, config: Config | None = None) -> Path:
    """Like :func:`find_study_path`, but a missing study is a configuration error."""
    found = find_study_path(explicit, config)
    if found is None:
        raise ConfigError(f"no study file given and no {STUDY_FILENAME} found")
    return found


def default_costs(explicit: Path | None, config: Config | None = None) -> CostModel | None:
    """The ``[costs]`` table of the resolved study, if there is a study and it has one."""
    path = find_study_path(explicit, config)
    if path is None:
        return None
    study = load_study(path)
    if study.costs is not None:
        logger.info("default costs from %s", path)
    return study.costs


__all__ = [
    "STUDY_FILENAME",
    "Config",
    "Study",
    "default_costs",
    "find_study_path",
    "load_config",
    "load_study",
    "resolve_study_path",
]
