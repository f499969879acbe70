from __future__ import annotations

# Serializable result objects emitted by the pdmeval CLI.
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .evaluation import FleetEvaluation
from .utils import dedupe_preserving_order


class IssueSeverity(str, Enum):
    """Represents the severity of an issue raised while producing a report."""

    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


class IssueCode(str, Enum):
    VARIANCE_CLAMPED = "variance_clamped"
    INFEASIBLE_PERFECT = "infeasible_perfect"
    DUPLICATE_RATIO = "duplicate_ratio"
    EMPTY_EVALUATION_SPLIT = "empty_evaluation_split"


@dataclass(slots=True)
class ReportIssue:
    """Single flagged condition; ``subject`` names the unit, ratio or policy concerned."""

    subject: str
    message: str
    severity: IssueSeverity
    code: IssueCode

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "message": self.message,
            "severity": self.severity.value,
            "code": self.code.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ReportIssue:
        return cls(
            subject=str(data["subject"]),
            message=str(data["message"]),
            severity=IssueSeverity(data["severity"]),
            code=IssueCode(data["code"]),
        )


def evaluation_issues(evaluation: FleetEvaluation, *, subject: str = "fleet") -> list[ReportIssue]:
    """Issues implied by the flags of a fleet evaluation."""
    issues = []
    if evaluation.variance_clamped:
        issues.append(
            ReportIssue(
                subject=subject,
                message="delta-method variance was negative and clamped to 0",
                severity=IssueSeverity.WARNING,
                code=IssueCode.VARIANCE_CLAMPED,
            ),
        )
    for unit_id in evaluation.excluded_units:
        issues.append(
            ReportIssue(
                subject=unit_id,
                message="perfect ordering is infeasible; unit excluded",
                severity=IssueSeverity.WARNING,
                code=IssueCode.INFEASIBLE_PERFECT,
            ),
        )
    return issues


def severity_counts(issues: Iterable[ReportIssue]) -> dict[str, int]:
    counts = Counter(issue.severity for issue in issues)
    return {severity.value: counts.get(severity, 0) for severity in IssueSeverity}


@dataclass(slots=True)
class EvaluationReport:
    """Fleet evaluation together with the context that produced it.

    ``context`` holds the command, setting, policy name, costs and any tuned
    parameters; it is written verbatim so downstream scripts can key on it.
    """

    evaluation: FleetEvaluation
    context: dict[str, Any] = field(default_factory=dict)
    issues: list[ReportIssue] = field(default_factory=list)

    def __post_init__(self) -> None:
        known = {(issue.code, issue.subject) for issue in self.issues}
        for issue in evaluation_issues(self.evaluation):
            if (issue.code, issue.subject) not in known:
                self.issues.append(issue)

    @property
    def m_hat(self) -> float:
        return self.evaluation.m_hat

    def to_dict(self) -> dict[str, Any]:
        return {
            "context": dict(self.context),
            "evaluation": self.evaluation.to_dict(),
            "issues": [issue.to_dict() for issue in self.issues],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EvaluationReport:
        return cls(
            evaluation=FleetEvaluation.from_dict(data["evaluation"]),
            context=dict(data.get("context", {})),
            issues=[ReportIssue.from_dict(item) for item in data.get("issues", [])],
        )


@dataclass(frozen=True, slots=True)
class SweepRow:
    cost_ratio: float
    policy: str
    m_hat: float
    ci_lo: float | None
    ci_hi: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "cost_ratio": self.cost_ratio,
            "policy": self.policy,
            "m_hat": self.m_hat,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
        }


SWEEP_COLUMNS = ("cost_ratio", "policy", "m_hat", "ci_lo", "ci_hi")


@dataclass(slots=True)
class SweepReport:
    """Metric per (cost ratio, policy) pair for plotting cost-ratio curves."""

    rows: list[SweepRow] = field(default_factory=list)
    issues: list[ReportIssue] = field(default_factory=list)

    def add(self, row: SweepRow) -> None:
        self.rows.append(row)

    def policies(self) -> list[str]:
        return dedupe_preserving_order(row.policy for row in self.rows)

    def cost_ratios(self) -> list[float]:
        return dedupe_preserving_order(row.cost_ratio for row in self.rows)

    def rows_for_policy(self, policy: str) -> list[SweepRow]:
        return [row for row in self.rows if row.policy == policy]

    def lookup(self, cost_ratio: float, policy: str) -> SweepRow:
        for row in self.rows:
            if row.cost_ratio == cost_ratio and row.policy == policy:
                return row
        raise KeyError((cost_ratio, policy))

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "issues": [issue.to_dict() for issue in self.issues],
        }


__all__ = [
    "SWEEP_COLUMNS",
    "EvaluationReport",
    "IssueCode",
    "IssueSeverity",
    "ReportIssue",
    "SweepReport",
    "SweepRow",
    "evaluation_issues",
    "severity_counts",
]
