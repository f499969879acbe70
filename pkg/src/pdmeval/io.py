"""File formats: NDJSON prediction traces, CSV truths, JSON reports and CSV sweeps."""

from __future__ import annotations

import csv
import io as _stdio
import json
import math
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from .core import (
    CdfPoints,
    PredictionTrace,
    RulDistribution,
    UnitTruth,
    distribution_from_dict,
    lognormal_from_cdf_points,
)
from .errors import DegenerateFitError, DomainError, InputError
from .report import SWEEP_COLUMNS, EvaluationReport, SweepReport, SweepRow
from .utils import atomic_write_text, strip_bom

TRUTH_COLUMNS = ("unit_id", "failure_time")


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite number {name} is not allowed")


def _load_json(text: str, *, line: int | None = None) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg}", line=line) from None
    except ValueError as exc:
        raise InputError(str(exc), line=line) from None


def _finite_number(value: Any, *, field: str, line: int | None) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise InputError(f"{field} must be a number", line=line)
    number = float(value)
    if not math.isfinite(number):
        raise InputError(f"{field} must be finite", line=line)
    return number


def _parse_trace_record(record: Any, line: int) -> tuple[str, float, RulDistribution]:
    if not isinstance(record, dict):
        raise InputError("record must be a JSON object", line=line)
    unit_id = record.get("unit_id")
    if not isinstance(unit_id, str) or not unit_id:
        raise InputError("unit_id must be a non-empty string", line=line)
    t = _finite_number(record.get("t"), field="t", line=line)
    payload = record.get("dist")
    if not isinstance(payload, dict):
        raise InputError("dist must be a JSON object", line=line)
    try:
        dist = distribution_from_dict(payload)
    except DomainError as exc:
        raise InputError(str(exc), line=line) from None
    return unit_id, t, dist


def parse_traces(text: str) -> list[PredictionTrace]:
    """Parse newline-delimited trace records into traces ordered by unit_id."""
    grouped: dict[str, list[tuple[float, RulDistribution]]] = {}
    seen: set[tuple[str, float]] = set()
    for index, line in enumerate(strip_bom(text).splitlines(), start=1):
        if not line.strip():
            continue
        unit_id, t, dist = _parse_trace_record(_load_json(line, line=index), index)
        if (unit_id, t) in seen:
            raise InputError(f"duplicate record for unit {unit_id} at t={t!r}", line=index)
        seen.add((unit_id, t))
        grouped.setdefault(unit_id, []).append((t, dist))
    traces = []
    for unit_id in sorted(grouped):
        entries = sorted(grouped[unit_id], key=lambda entry: entry[0])
        try:
            traces.append(PredictionTrace(unit_id=unit_id, entries=tuple(entries)))
        except DomainError as exc:
            raise InputError(str(exc)) from None
    return traces


def read_traces(path: str | Path) -> list[PredictionTrace]:
    return parse_traces(Path(path).read_text(encoding="utf-8"))


def dump_traces(traces: Iterable[PredictionTrace]) -> str:
    lines = []
    for trace in sorted(traces, key=lambda item: item.unit_id):
        for t, dist in trace.entries:
            record = {"unit_id": trace.unit_id, "t": t, "dist": dist.to_dict()}
            lines.append(json.dumps(record, allow_nan=False, separators=(",", ":")))
    return "".join(f"{line}\n" for line in lines)


def write_traces(traces: Iterable[PredictionTrace], path: str | Path) -> None:
    atomic_write_text(Path(path), dump_traces(traces))


def parse_truths(text: str) -> list[UnitTruth]:
    reader = csv.reader(_stdio.StringIO(strip_bom(text)))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(column.strip() for column in header) != TRUTH_COLUMNS:
        raise InputError(f"expected header {','.join(TRUTH_COLUMNS)}", line=1)
    truths: list[UnitTruth] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(TRUTH_COLUMNS):
            raise InputError(f"expected {len(TRUTH_COLUMNS)} columns, got {len(row)}", line=line)
        unit_id, raw_time = row[0].strip(), row[1].strip()
        if not unit_id:
            raise InputError("unit_id is empty", line=line)
        if unit_id in seen:
            raise InputError(f"duplicate unit_id {unit_id}", line=line)
        try:
            failure_time = float(raw_time)
        except ValueError:
            raise InputError(f"failure_time {raw_time!r} is not a number", line=line) from None
        if not math.isfinite(failure_time):
            raise InputError("failure_time must be finite", line=line)
        try:
            truths.append(UnitTruth(unit_id=unit_id, failure_time=failure_time))
        except DomainError as exc:
            raise InputError(str(exc), line=line) from None
        seen.add(unit_id)
    return truths


def read_truths(path: str | Path) -> list[UnitTruth]:
    return parse_truths(Path(path).read_text(encoding="utf-8"))


def dump_truths(truths: Iterable[UnitTruth]) -> str:
    buffer = _stdio.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRUTH_COLUMNS)
    for truth in sorted(truths, key=lambda item: item.unit_id):
        writer.writerow([truth.unit_id, repr(truth.failure_time)])
    return buffer.getvalue()


def write_truths(truths: Iterable[UnitTruth], path: str | Path) -> None:
    atomic_write_text(Path(path), dump_truths(truths))


def dump_json(data: Mapping[str, Any]) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def write_report(report: EvaluationReport, path: str | Path) -> None:
    atomic_write_text(Path(path), dump_json(report.to_dict()))


def read_report(path: str | Path) -> EvaluationReport:
    data = _load_json(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or "evaluation" not in data:
        raise InputError(f"{path} is not an evaluation report")
    try:
        return EvaluationReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed report {path}: {exc}") from None


def _optional_cell(value: float | None) -> str:
    return "" if value is None else repr(value)


def dump_sweep_csv(report: SweepReport) -> str:
    buffer = _stdio.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in report.rows:
        writer.writerow(
            [
                repr(row.cost_ratio),
                row.policy,
                repr(row.m_hat),
                _optional_cell(row.ci_lo),
                _optional_cell(row.ci_hi),
            ],
        )
    return buffer.getvalue()


def write_sweep_csv(report: SweepReport, path: str | Path) -> None:
    atomic_write_text(Path(path), dump_sweep_csv(report))


def read_sweep_csv(path: str | Path) -> SweepReport:
    reader = csv.DictReader(_stdio.StringIO(strip_bom(Path(path).read_text(encoding="utf-8"))))
    if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
        raise InputError(f"expected header {','.join(SWEEP_COLUMNS)}", line=1)
    report = SweepReport()
    for row in reader:
        try:
            report.add(
                SweepRow(
                    cost_ratio=float(row["cost_ratio"]),
                    policy=row["policy"],
                    m_hat=float(row["m_hat"]),
                    ci_lo=float(row["ci_lo"]) if row["ci_lo"] else None,
                    ci_hi=float(row["ci_hi"]) if row["ci_hi"] else None,
                ),
            )
        except ValueError as exc:
            raise InputError(str(exc), line=reader.line_num) from None
    return report


def fit_traces_lognormal(traces: Iterable[PredictionTrace]) -> list[PredictionTrace]:
    """Replace CDF-point predictions with their two-point lognormal fit."""
    fitted = []
    for trace in traces:
        entries = []
        for t, dist in trace.entries:
            if isinstance(dist, CdfPoints):
                try:
                    dist = lognormal_from_cdf_points(dist)
                except DegenerateFitError as exc:
                    raise DegenerateFitError(f"unit {trace.unit_id} at t={t}: {exc}") from None
            entries.append((t, dist))
        fitted.append(PredictionTrace(unit_id=trace.unit_id, entries=tuple(entries)))
    return fitted


__all__ = [
    "TRUTH_COLUMNS",
    "dump_json",
    "dump_sweep_csv",
    "dump_traces",
    "dump_truths",
    "fit_traces_lognormal",
    "parse_traces",
    "parse_truths",
    "read_report",
    "read_sweep_csv",
    "read_traces",
    "read_truths",
    "write_report",
    "write_sweep_csv",
    "write_traces",
    "write_truths",
]
