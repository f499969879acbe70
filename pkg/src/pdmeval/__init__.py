"""pdmeval public API."""

from importlib import metadata

__version__ = metadata.version("pdmeval")

from .core import (
    CdfPoints,
    CostModel,
    LifecycleOutcome,
    LogNormal,
    PointMass,
    PredictionTrace,
    ReplacementKind,
    TimeGrid,
    UnitTruth,
    WeightedSamples,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    DomainError,
    InfeasiblePerfectError,
    InputError,
    NumericalError,
    PdmError,
)
from .evaluation import CiMethod, FleetEvaluation, Setting, evaluate_setting, metric
from .optimize import (
    optimize_ordering_thresholds,
    optimize_policy1_threshold,
    select_hyperparameter_config,
)
from .policies import (
    HeuristicPolicy,
    OpportunityLossPolicy,
    OrderingPolicyParams,
    Policy1Params,
    RbarOption,
    RenewalPolicy,
)
from .report import EvaluationReport, IssueSeverity, ReportIssue, SweepReport
from .simulator import SimulatorConfig, sample_fleet

__all__ = [
    "CdfPoints",
    "CiMethod",
    "ConfigError",
    "CostModel",
    "DegenerateFitError",
    "DomainError",
    "EvaluationReport",
    "FleetEvaluation",
    "HeuristicPolicy",
    "InfeasiblePerfectError",
    "InputError",
    "IssueSeverity",
    "LifecycleOutcome",
    "LogNormal",
    "NumericalError",
    "OpportunityLossPolicy",
    "OrderingPolicyParams",
    "PdmError",
    "PointMass",
    "Policy1Params",
    "PredictionTrace",
    "RbarOption",
    "RenewalPolicy",
    "ReplacementKind",
    "ReportIssue",
    "Setting",
    "SimulatorConfig",
    "SweepReport",
    "TimeGrid",
    "UnitTruth",
    "WeightedSamples",
    "evaluate_setting",
    "metric",
    "optimize_ordering_thresholds",
    "optimize_policy1_threshold",
    "sample_fleet",
    "select_hyperparameter_config",
    "__version__",
]
