from __future__ import annotations

# Shared helper utilities for pdmeval modules.
import hashlib
import os
import tempfile
from collections.abc import Hashable, Iterable
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import TYPE_CHECKING, TypeVar

from .errors import ConfigError

BOM = "\ufeff"

if TYPE_CHECKING:
    OptionalPath = Path | None
    OptionalFloat = float | None
    OptionalInt = int | None
    OptionalStr = str | None
else:  # pragma: no cover - Typer reads the runtime annotations
    OptionalPath = Path
    OptionalFloat = float
    OptionalInt = int
    OptionalStr = str

T = TypeVar("T", bound=Hashable)


def strip_bom(text: str) -> str:
    return text.removeprefix(BOM)


def find_up(filename: str, start_dir: Path | None = None) -> Path | None:
    """Nearest ``filename`` in ``start_dir`` (default: cwd) or one of its parents."""
    start = start_dir or Path.cwd()
    return next(
        (folder / filename for folder in (start, *start.parents) if (folder / filename).is_file()),
        None,
    )


def dedupe_preserving_order(values: Iterable[T]) -> list[T]:
    """Drop repeated values, keeping the first occurrence."""

    return list(dict.fromkeys(values))


def duplicates(values: Iterable[T]) -> list[T]:
    seen: set[T] = set()
    repeated: dict[T, None] = {}
    for value in values:
        if value in seen:
            repeated[value] = None
        seen.add(value)
    return list(repeated)


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""

    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise


def unit_hash_fraction(unit_id: str) -> float:
    """Stable pseudo-uniform value in [0, 1) derived from a unit id."""

    digest = hashlib.sha256(unit_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def split_unit_ids(unit_ids: Iterable[str], fraction: float) -> tuple[list[str], list[str]]:
    """Split ids into (train, evaluation) by hash; ``fraction`` is the train share."""

    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1], got {fraction}")
    train: list[str] = []
    held_out: list[str] = []
    for unit_id in sorted(unit_ids):
        (train if unit_hash_fraction(unit_id) < fraction else held_out).append(unit_id)
    return train, held_out


def parse_float_list(text: str) -> list[float]:
    """Parse ``"0.1,0.2"`` or ``"0.01:0.99:0.01"`` (inclusive range) into floats."""

    text = text.strip()
    if not text:
        raise ConfigError("expected at least one number")
    if ":" in text:
        return _parse_range(text)
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated number list: {text!r}") from None


def _parse_range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (Decimal(part.strip()) for part in parts)
    except InvalidOperation:
        raise ConfigError(f"range bounds must be numbers, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"range {text!r} is empty")
    # Decimal steps land exactly on values such as 0.01 and 0.99
    values: list[float] = []
    current = start
    while current <= stop:
        values.append(float(current))
        current += step
    return values


def format_number(value: float | None, digits: int = 6) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}g}"


__all__ = [
    "BOM",
    "OptionalFloat",
    "OptionalInt",
    "OptionalPath",
    "OptionalStr",
    "atomic_write_text",
    "dedupe_preserving_order",
    "duplicates",
    "find_up",
    "format_number",
    "parse_float_list",
    "split_unit_ids",
    "strip_bom",
    "unit_hash_fraction",
]
