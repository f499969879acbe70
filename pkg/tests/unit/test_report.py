from __future__ import annotations

import pytest

from pdmeval.evaluation import FleetEvaluation
from pdmeval.report import (
    EvaluationReport,
    IssueCode,
    IssueSeverity,
    ReportIssue,
    SweepReport,
    SweepRow,
    evaluation_issues,
    severity_counts,
)


def _evaluation(**overrides: object) -> FleetEvaluation:
    values: dict[str, object] = {
        "r_hat": 0.06,
        "var_r_hat": 1e-5,
        "r_perfect": 0.05,
        "var_r_perfect": 1e-6,
        "m_hat": 0.2,
        "var_m_hat": 4e-3,
        "ci95_m": (0.08, 0.32),
        "n_units": 10,
    }
    values.update(overrides)
    return FleetEvaluation(**values)  # type: ignore[arg-type]


def test_evaluation_issues_reflect_flags() -> None:
    assert evaluation_issues(_evaluation()) == []
    issues = evaluation_issues(_evaluation(variance_clamped=True, excluded_units=("u1", "u2")))
    assert [issue.code for issue in issues] == [
        IssueCode.VARIANCE_CLAMPED,
        IssueCode.INFEASIBLE_PERFECT,
        IssueCode.INFEASIBLE_PERFECT,
    ]
    assert [issue.subject for issue in issues] == ["fleet", "u1", "u2"]
    assert all(issue.severity is IssueSeverity.WARNING for issue in issues)


def test_severity_counts_lists_every_level() -> None:
    issues = [
        ReportIssue("a", "x", IssueSeverity.WARNING, IssueCode.DUPLICATE_RATIO),
        ReportIssue("b", "y", IssueSeverity.WARNING, IssueCode.DUPLICATE_RATIO),
    ]
    assert severity_counts(issues) == {"error": 0, "warning": 2, "info": 0}
    assert severity_counts([]) == {"error": 0, "warning": 0, "info": 0}


def test_report_adds_flag_issues_once() -> None:
    evaluation = _evaluation(excluded_units=("u1",))
    existing = ReportIssue(
        "u1",
        "already noted",
        IssueSeverity.WARNING,
        IssueCode.INFEASIBLE_PERFECT,
    )
    report = EvaluationReport(evaluation, issues=[existing])
    assert report.issues == [existing]
    assert report.m_hat == 0.2


def test_report_serializes_context_and_issues() -> None:
    report = EvaluationReport(
        _evaluation(variance_clamped=True),
        context={"command": "evaluate", "policy": "renewal"},
    )
    data = report.to_dict()
    assert data["context"] == {"command": "evaluate", "policy": "renewal"}
    assert data["evaluation"]["ci95_m"] == [0.08, 0.32]
    assert data["issues"][0]["code"] == "variance_clamped"
    restored = EvaluationReport.from_dict(data)
    assert restored.issues == report.issues


def test_sweep_report_lookups() -> None:
    report = SweepReport()
    report.add(SweepRow(0.1, "heuristic", 0.4, 0.3, 0.5))
    report.add(SweepRow(0.1, "renewal", 0.2, None, None))
    report.add(SweepRow(0.2, "heuristic", 0.5, 0.4, 0.6))
    assert report.policies() == ["heuristic", "renewal"]
    assert report.cost_ratios() == [0.1, 0.2]
    assert [row.m_hat for row in report.rows_for_policy("heuristic")] == [0.4, 0.5]
    assert report.lookup(0.1, "renewal").ci_lo is None
    with pytest.raises(KeyError):
        report.lookup(0.2, "renewal")
    assert report.to_dict()["rows"][1] == {
        "cost_ratio": 0.1,
        "policy": "renewal",
        "m_hat": 0.2,
        "ci_lo": None,
        "ci_hi": None,
    }
