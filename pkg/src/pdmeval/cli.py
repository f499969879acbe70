from __future__ import annotations

import json
import logging
import statistics
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, NoReturn, cast

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .config import default_costs, load_config, load_study, resolve_study_path
from .core import CostModel, PredictionTrace, TimeGrid, UnitTruth
from .errors import ConfigError, DomainError, NumericalError, PdmError
from .evaluation import CiMethod, Setting, evaluate_setting
from .io import (
    dump_json,
    dump_sweep_csv,
    fit_traces_lognormal,
    read_traces,
    read_truths,
    write_report,
    write_sweep_csv,
    write_traces,
    write_truths,
)
from .optimize import (
    HyperparameterCandidate,
    SweepOptions,
    SweepPolicy,
    ThresholdGrid,
    best_candidate_index,
    cost_sweep,
    optimize_ordering_thresholds,
    optimize_policy1_threshold,
    score_candidates,
)
from .policies import (
    HeuristicPolicy,
    OrderingPolicyParams,
    Policy1Params,
    RbarOption,
    ReplacementPolicy,
    fit_population,
    make_policy,
    rbar_estimate,
)
from .report import (
    EvaluationReport,
    IssueCode,
    IssueSeverity,
    ReportIssue,
    SweepReport,
    severity_counts,
)
from .simulator import sample_fleet
from .utils import (
    OptionalFloat,
    OptionalInt,
    OptionalPath,
    OptionalStr,
    atomic_write_text,
    duplicates,
    format_number,
    parse_float_list,
    split_unit_ids,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4


def version_callback(value: bool) -> None:
    if value:
        typer.echo(f"pdmeval version: {__version__}")
        raise typer.Exit()


app = typer.Typer(
    help="Evaluate and tune predictive-maintenance policies against perfect prognostics.",
    add_completion=True,
)
console = Console()
err_console = Console(stderr=True)
DEFAULT_OUTPUT_FORMAT = "text"


def _configure_logging(verbose: bool) -> None:
    handler = RichHandler(console=err_console, show_path=False, show_time=False)
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[handler],
        force=True,
    )


@app.callback()
def main(
    version: bool = typer.Option(
        None,
        "--version",
        callback=version_callback,
        is_eager=True,
        help="Show the version and exit.",
    ),
    verbose: bool = typer.Option(
        False,
        "--verbose",
        "-v",
        help="Log progress to standard error.",
    ),
) -> None:
    """Configure logging for every subcommand."""
    _configure_logging(verbose)


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"


class PolicyName(str, Enum):
    HEURISTIC = "heuristic"
    RENEWAL = "renewal"
    OPPORTUNITY = "opportunity"


def _coerce_output_format(raw: str) -> OutputFormat:
    try:
        return OutputFormat(str(raw).lower())
    except ValueError:
        allowed = ", ".join(fmt.value for fmt in OutputFormat)
        _usage_error(f"Invalid value for '--format': output format must be one of: {allowed}")


def _usage_error(message: str) -> NoReturn:
    typer.echo(message, err=True)
    raise typer.Exit(code=EXIT_CONFIG)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_INPUT


@contextmanager
def _handled_errors() -> Iterator[None]:
    """Turn library errors into an error line on stderr and a distinct exit status."""
    try:
        yield
    except (PdmError, OSError) as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(code=_exit_code(exc)) from exc


def _emit_json(payload: Any) -> None:
    typer.echo(json.dumps(payload, indent=2, allow_nan=False))


TRACES_ARGUMENT = typer.Argument(..., help="Prediction traces (NDJSON, one record per line).")
TRUTHS_ARGUMENT = typer.Argument(..., help="True failure times (CSV unit_id,failure_time).")
DELTA_T_OPTION = typer.Option(..., "--delta-t", help="Decision grid spacing in cycles.")
CP_OPTION = typer.Option(None, "--cp", help="Preventive replacement cost.")
CC_OPTION = typer.Option(None, "--cc", help="Corrective replacement cost.")
CUNAV_OPTION = typer.Option(
    None,
    "--c-unav",
    help="Unavailability cost per cycle of delay (default 0).",
)
CINV_OPTION = typer.Option(
    None,
    "--c-inv",
    help="Inventory cost per cycle a spare waits (default 0).",
)
LEAD_TIME_OPTION = typer.Option(
    None,
    "--lead-time",
    help="Spare part lead time in cycles (default 0).",
)
COSTS_CONFIG_OPTION = typer.Option(
    None,
    "--config",
    help="Study TOML whose [costs] table fills in cost flags that are not given.",
)
SETTING_OPTION = typer.Option(
    Setting.REPLACEMENT,
    "--setting",
    case_sensitive=False,
    help="replacement or ordering.",
)
POLICY_OPTION = typer.Option(
    None,
    "--policy",
    case_sensitive=False,
    help="Replacement policy: heuristic (default), renewal or opportunity.",
)
P_THRES_OPTION = typer.Option(
    None,
    "--p-thres",
    help="Heuristic failure-probability threshold (default c_p/c_c).",
)
RBAR_OPTION = typer.Option(
    None,
    "--rbar",
    case_sensitive=False,
    help="Cost rate pricing lost life for the opportunity policy: upper, lower or average.",
)
P_ORDER_OPTION = typer.Option(None, "--p-order", help="Ordering threshold (default c_p/c_c).")
P_REP_OPTION = typer.Option(None, "--p-rep", help="Replacement threshold when ordering.")
ALLOW_FAILURE_OPTION = typer.Option(
    False,
    "--perfect-allow-failure",
    help="Let the perfect baseline run to failure when that yields the lower cost rate.",
)
CI_OPTION = typer.Option(CiMethod.NORMAL, "--ci", case_sensitive=False, help="normal or bootstrap.")
RESAMPLES_OPTION = typer.Option(10_000, "--resamples", help="Bootstrap resamples.")
SEED_OPTION = typer.Option(0, "--seed", help="Seed for bootstrap resampling.")
FIT_LOGNORMAL_OPTION = typer.Option(
    False,
    "--fit-lognormal",
    help="Replace CDF-point predictions with their two-point lognormal fit.",
)
OUTPUT_OPTION = typer.Option(None, "--output", "-o", help="Write the report to this file.")
FORMAT_OPTION = typer.Option(
    DEFAULT_OUTPUT_FORMAT,
    "--format",
    "-f",
    help="Output format: text or json.",
)
THRESHOLDS_OPTION = typer.Option(
    "0.01:0.99:0.01",
    "--thresholds",
    help="Candidate thresholds as a list (0.1,0.2) or range (start:stop:step).",
)
SPLIT_OPTION = typer.Option(
    1.0,
    "--split",
    help="Share of units (by unit id hash) used for tuning; the rest is evaluated.",
)

OUTPUT_OPTION_DEFAULT = cast(OptionalPath, OUTPUT_OPTION)
FORMAT_OPTION_DEFAULT = cast(str, FORMAT_OPTION)
POLICY_OPTION_DEFAULT = cast(PolicyName, POLICY_OPTION)
RBAR_OPTION_DEFAULT = cast(RbarOption, RBAR_OPTION)
P_THRES_OPTION_DEFAULT = cast(OptionalFloat, P_THRES_OPTION)
P_ORDER_OPTION_DEFAULT = cast(OptionalFloat, P_ORDER_OPTION)
P_REP_OPTION_DEFAULT = cast(OptionalFloat, P_REP_OPTION)
CP_OPTION_DEFAULT = cast(OptionalFloat, CP_OPTION)
CC_OPTION_DEFAULT = cast(OptionalFloat, CC_OPTION)
CUNAV_OPTION_DEFAULT = cast(OptionalFloat, CUNAV_OPTION)
CINV_OPTION_DEFAULT = cast(OptionalFloat, CINV_OPTION)
LEAD_TIME_OPTION_DEFAULT = cast(OptionalFloat, LEAD_TIME_OPTION)
COSTS_CONFIG_OPTION_DEFAULT = cast(OptionalPath, COSTS_CONFIG_OPTION)

COST_FLAGS = {"c_p": "--cp", "c_c": "--cc"}


def _cost_values(study: Path | None, **flags: float | None) -> dict[str, float]:
    """Cost flags that were given, over the study's ``[costs]`` for the rest."""
    given = {name: value for name, value in flags.items() if value is not None}
    if len(given) < len(flags):
        defaults = default_costs(study)
        if defaults is not None:
            return {name: defaults.to_dict()[name] for name in flags} | given
    return given


def _require_costs(values: dict[str, float], *names: str) -> None:
    missing = [COST_FLAGS[name] for name in names if name not in values]
    if missing:
        raise ConfigError(
            f"missing {' and '.join(missing)}: pass the flag or add a [costs] table to the study",
        )


def _costs(
    study: Path | None,
    cp: float | None,
    cc: float | None,
    c_unav: float | None,
    c_inv: float | None,
    lead_time: float | None,
) -> CostModel:
    values = _cost_values(
        study,
        c_p=cp,
        c_c=cc,
        c_unav=c_unav,
        c_inv=c_inv,
        lead_time=lead_time,
    )
    _require_costs(values, "c_p", "c_c")
    return CostModel(**values)


def _check_allow_failure(setting: Setting, allow_failure: bool) -> None:
    if allow_failure and setting is Setting.ORDERING:
        _usage_error("--perfect-allow-failure only applies to the replacement setting")


def _grid(delta_t: float, truths: Sequence[UnitTruth]) -> TimeGrid:
    """Grid long enough that no unit's last decision step is cut off."""
    if not truths:
        raise ConfigError("the truth file lists no units")
    try:
        return TimeGrid.covering(delta_t, max(truth.failure_time for truth in truths))
    except DomainError as exc:
        raise ConfigError(f"--delta-t: {exc}") from None


def _load_fleet(
    traces_path: Path,
    truths_path: Path,
    *,
    fit_lognormal: bool,
) -> tuple[list[PredictionTrace], list[UnitTruth]]:
    traces = read_traces(traces_path)
    truths = read_truths(truths_path)
    if fit_lognormal:
        traces = fit_traces_lognormal(traces)
    logger.info("loaded %d traces and %d truths", len(traces), len(truths))
    return traces, truths


def _resolve_policies(
    setting: Setting,
    costs: CostModel,
    truths: Sequence[UnitTruth],
    *,
    policy: PolicyName | None,
    p_thres: float | None,
    rbar: RbarOption | None,
    p_order: float | None,
    p_rep: float | None,
) -> tuple[ReplacementPolicy | None, OrderingPolicyParams | None, dict[str, Any]]:
    """Validate policy flags against the setting and build the policy objects."""
    if setting is Setting.ORDERING:
        if policy is not None or p_thres is not None or rbar is not None:
            raise ConfigError("--policy, --p-thres and --rbar apply to the replacement setting")
        ordering = OrderingPolicyParams(
            costs.ratio if p_order is None else p_order,
            costs.ratio if p_rep is None else p_rep,
        )
        return None, ordering, {
            "policy": "ordering",
            "p_order_thres": ordering.p_order_thres,
            "p_rep_thres": ordering.p_rep_thres,
        }
    if p_order is not None or p_rep is not None:
        raise ConfigError("--p-order and --p-rep apply to the ordering setting")
    policy = policy or PolicyName.HEURISTIC
    if p_thres is not None and policy is not PolicyName.HEURISTIC:
        raise ConfigError("--p-thres applies to the heuristic policy only")
    if rbar is not None and policy is not PolicyName.OPPORTUNITY:
        raise ConfigError("--rbar applies to the opportunity policy only")
    context: dict[str, Any] = {"policy": policy.value}
    r_bar = None
    if policy is PolicyName.OPPORTUNITY:
        option = rbar or RbarOption.UPPER_BOUND_RENEWAL
        r_bar = rbar_estimate(fit_population(truths), costs, option)
        context.update(rbar_option=option.value, r_bar=r_bar)
    replacement = make_policy(policy.value, costs=costs, p_thres=p_thres, r_bar=r_bar)
    if isinstance(replacement, HeuristicPolicy):
        context["p_thres"] = replacement.params.p_thres
    return replacement, None, context


def _render_evaluation(report: EvaluationReport, *, title: str) -> None:
    evaluation = report.evaluation
    table = Table(title=title, show_header=True, header_style="bold")
    table.add_column("Quantity")
    table.add_column("Value", justify="right")
    ci = evaluation.ci95_m
    rows = [
        ("R_hat", format_number(evaluation.r_hat)),
        ("Var[R_hat]", format_number(evaluation.var_r_hat)),
        ("R_perfect", format_number(evaluation.r_perfect)),
        ("M_hat", format_number(evaluation.m_hat)),
        ("Var[M_hat]", format_number(evaluation.var_m_hat)),
        (
            f"95% CI ({evaluation.ci_method.value})",
            "-" if ci is None else f"[{format_number(ci[0])}, {format_number(ci[1])}]",
        ),
        ("Units", str(evaluation.n_units)),
        ("Preventive share", f"{evaluation.preventive_share:.1%}"),
    ]
    for key, value in report.context.items():
        if key.startswith("p_") or key in {"policy", "r_bar", "rbar_option"}:
            rows.append((key, value if isinstance(value, str) else format_number(value)))
    for name, value in rows:
        table.add_row(name, value)
    console.print(table)
    _render_issue_footer(report.issues, excluded=len(evaluation.excluded_units))


def _render_issue_footer(issues: Sequence[ReportIssue], *, excluded: int = 0) -> None:
    counts = severity_counts(issues)
    if excluded:
        console.print(f"[yellow]Excluded units (perfect ordering infeasible): {excluded}[/yellow]")
    if counts[IssueSeverity.WARNING.value]:
        console.print(f"Warnings: {counts[IssueSeverity.WARNING.value]}")


def _finish(
    report: EvaluationReport,
    *,
    output: Path | None,
    fmt: OutputFormat,
    title: str,
) -> None:
    if output is not None:
        write_report(report, output)
        logger.info("report written to %s", output)
    if fmt is OutputFormat.JSON:
        _emit_json(report.to_dict())
    else:
        _render_evaluation(report, title=title)


@app.command()
def simulate(
    traces: Path = typer.Option(..., "--traces", help="Where to write prediction traces."),
    truths: Path = typer.Option(..., "--truths", help="Where to write true failure times."),
    config: OptionalPath = typer.Option(None, "--config", help="Study TOML file."),
    sigma_ln_eps: OptionalFloat = typer.Option(
        None,
        "--sigma-ln-eps",
        help="Override the log-scale prediction noise.",
    ),
    seed: OptionalInt = typer.Option(None, "--seed", help="Override the study seed."),
    n_units: OptionalInt = typer.Option(None, "--n-units", help="Override the fleet size."),
    output_format: str = FORMAT_OPTION_DEFAULT,
) -> None:
    """Sample a synthetic fleet and write its traces and truths."""
    fmt = _coerce_output_format(output_format)
    with _handled_errors():
        study = load_study(resolve_study_path(config, load_config()))
        sim = study.simulator.with_overrides(
            sigma_ln_eps=sigma_ln_eps,
            seed=seed,
            n_units=n_units,
        )
        fleet_truths, fleet_traces = sample_fleet(sim)
        write_traces(fleet_traces, traces)
        write_truths(fleet_truths, truths)
    failure_times = [truth.failure_time for truth in fleet_truths]
    summary = {
        "n_units": len(failure_times),
        "failure_time_mean": statistics.fmean(failure_times),
        "failure_time_std": statistics.stdev(failure_times) if len(failure_times) > 1 else 0.0,
        "simulator": sim.to_dict(),
    }
    if fmt is OutputFormat.JSON:
        _emit_json(summary)
    else:
        table = Table(title="Simulated fleet", show_header=True, header_style="bold")
        table.add_column("Units", justify="right")
        table.add_column("Mean T_F", justify="right")
        table.add_column("Std T_F", justify="right")
        table.add_row(
            str(summary["n_units"]),
            format_number(summary["failure_time_mean"]),
            format_number(summary["failure_time_std"]),
        )
        console.print(table)
    raise typer.Exit(code=EXIT_OK)


@app.command()
def evaluate(
    traces: Path = TRACES_ARGUMENT,
    truths: Path = TRUTHS_ARGUMENT,
    delta_t: float = DELTA_T_OPTION,
    cp: OptionalFloat = CP_OPTION_DEFAULT,
    cc: OptionalFloat = CC_OPTION_DEFAULT,
    c_unav: OptionalFloat = CUNAV_OPTION_DEFAULT,
    c_inv: OptionalFloat = CINV_OPTION_DEFAULT,
    lead_time: OptionalFloat = LEAD_TIME_OPTION_DEFAULT,
    config: OptionalPath = COSTS_CONFIG_OPTION_DEFAULT,
    setting: Setting = SETTING_OPTION,
    policy: PolicyName = POLICY_OPTION_DEFAULT,
    p_thres: OptionalFloat = P_THRES_OPTION_DEFAULT,
    rbar: RbarOption = RBAR_OPTION_DEFAULT,
    p_order: OptionalFloat = P_ORDER_OPTION_DEFAULT,
    p_rep: OptionalFloat = P_REP_OPTION_DEFAULT,
    perfect_allow_failure: bool = ALLOW_FAILURE_OPTION,
    ci: CiMethod = CI_OPTION,
    resamples: int = RESAMPLES_OPTION,
    seed: int = SEED_OPTION,
    fit_lognormal: bool = FIT_LOGNORMAL_OPTION,
    output: OptionalPath = OUTPUT_OPTION_DEFAULT,
    output_format: str = FORMAT_OPTION_DEFAULT,
) -> None:
    """Estimate the cost-rate metric of one policy on a fleet."""
    fmt = _coerce_output_format(output_format)
    _check_allow_failure(setting, perfect_allow_failure)
    with _handled_errors():
        costs = _costs(config, cp, cc, c_unav, c_inv, lead_time)
        fleet_traces, fleet_truths = _load_fleet(traces, truths, fit_lognormal=fit_lognormal)
        replacement, ordering, context = _resolve_policies(
            setting,
            costs,
            fleet_truths,
            policy=policy,
            p_thres=p_thres,
            rbar=rbar,
            p_order=p_order,
            p_rep=p_rep,
        )
        evaluation = evaluate_setting(
            fleet_traces,
            fleet_truths,
            _grid(delta_t, fleet_truths),
            costs,
            setting,
            policy=replacement,
            ordering=ordering,
            allow_failure=perfect_allow_failure,
            ci_method=ci,
            n_resamples=resamples,
            seed=seed,
        )
        report = EvaluationReport(
            evaluation,
            context={
                "command": "evaluate",
                "setting": setting.value,
                "delta_t": delta_t,
                "costs": costs.to_dict(),
                **context,
            },
        )
        _finish(report, output=output, fmt=fmt, title="Policy evaluation")
    raise typer.Exit(code=EXIT_OK)


def _split_fleet(
    traces: Sequence[PredictionTrace],
    truths: Sequence[UnitTruth],
    split: float,
) -> tuple[
    tuple[list[PredictionTrace], list[UnitTruth]],
    tuple[list[PredictionTrace], list[UnitTruth]],
    list[ReportIssue],
]:
    train_ids, held_out_ids = split_unit_ids((truth.unit_id for truth in truths), split)
    issues: list[ReportIssue] = []
    if not held_out_ids:
        if split < 1.0:
            logger.warning("split %.3g left no held-out units; evaluating on the tuning set", split)
            issues.append(
                ReportIssue(
                    subject="split",
                    message="no held-out units; evaluated on the tuning set",
                    severity=IssueSeverity.WARNING,
                    code=IssueCode.EMPTY_EVALUATION_SPLIT,
                ),
            )
        held_out_ids = train_ids

    def subset(ids: Sequence[str]) -> tuple[list[PredictionTrace], list[UnitTruth]]:
        keep = set(ids)
        return (
            [trace for trace in traces if trace.unit_id in keep],
            [truth for truth in truths if truth.unit_id in keep],
        )

    return subset(train_ids), subset(held_out_ids), issues


@app.command()
def optimize(
    traces: Path = TRACES_ARGUMENT,
    truths: Path = TRUTHS_ARGUMENT,
    delta_t: float = DELTA_T_OPTION,
    cp: OptionalFloat = CP_OPTION_DEFAULT,
    cc: OptionalFloat = CC_OPTION_DEFAULT,
    c_unav: OptionalFloat = CUNAV_OPTION_DEFAULT,
    c_inv: OptionalFloat = CINV_OPTION_DEFAULT,
    lead_time: OptionalFloat = LEAD_TIME_OPTION_DEFAULT,
    config: OptionalPath = COSTS_CONFIG_OPTION_DEFAULT,
    setting: Setting = SETTING_OPTION,
    thresholds: str = THRESHOLDS_OPTION,
    split: float = SPLIT_OPTION,
    perfect_allow_failure: bool = ALLOW_FAILURE_OPTION,
    ci: CiMethod = CI_OPTION,
    fit_lognormal: bool = FIT_LOGNORMAL_OPTION,
    output: OptionalPath = OUTPUT_OPTION_DEFAULT,
    output_format: str = FORMAT_OPTION_DEFAULT,
) -> None:
    """Tune heuristic thresholds on one part of the fleet and evaluate on the rest."""
    fmt = _coerce_output_format(output_format)
    _check_allow_failure(setting, perfect_allow_failure)
    with _handled_errors():
        costs = _costs(config, cp, cc, c_unav, c_inv, lead_time)
        grid_values = ThresholdGrid.parse(thresholds)
        fleet_traces, fleet_truths = _load_fleet(traces, truths, fit_lognormal=fit_lognormal)
        grid = _grid(delta_t, fleet_truths)
        (train_traces, train_truths), (eval_traces, eval_truths), issues = _split_fleet(
            fleet_traces,
            fleet_truths,
            split,
        )
        context: dict[str, Any] = {
            "command": "optimize",
            "setting": setting.value,
            "delta_t": delta_t,
            "costs": costs.to_dict(),
            "split": split,
            "n_train": len(train_truths),
            "n_eval": len(eval_truths),
        }
        replacement: ReplacementPolicy | None = None
        ordering: OrderingPolicyParams | None = None
        if setting is Setting.REPLACEMENT:
            optimum = optimize_policy1_threshold(
                train_traces,
                train_truths,
                grid,
                costs,
                grid_values,
                allow_failure=perfect_allow_failure,
            )
            replacement = HeuristicPolicy(Policy1Params(optimum.p_thres))
            context.update(policy="heuristic", p_thres=optimum.p_thres, train_m_hat=optimum.m_hat)
        else:
            ordering_optimum = optimize_ordering_thresholds(
                train_traces,
                train_truths,
                grid,
                costs,
                grid_values,
                grid_values,
            )
            ordering = ordering_optimum.params
            context.update(
                policy="ordering",
                p_order_thres=ordering_optimum.p_order_thres,
                p_rep_thres=ordering_optimum.p_rep_thres,
                train_m_hat=ordering_optimum.m_hat,
            )
        evaluation = evaluate_setting(
            eval_traces,
            eval_truths,
            grid,
            costs,
            setting,
            policy=replacement,
            ordering=ordering,
            allow_failure=perfect_allow_failure,
            ci_method=ci,
        )
        report = EvaluationReport(evaluation, context=context, issues=issues)
        _finish(report, output=output, fmt=fmt, title="Optimized thresholds")
    raise typer.Exit(code=EXIT_OK)


def _render_sweep(report: SweepReport) -> None:
    table = Table(title="Cost sweep", show_header=True, header_style="bold")
    table.add_column("c_p/c_c", justify="right")
    for policy in report.policies():
        table.add_column(policy, justify="right")
    for ratio in report.cost_ratios():
        cells = [format_number(ratio, 4)]
        for policy in report.policies():
            row = report.lookup(ratio, policy)
            cells.append(format_number(row.m_hat))
        table.add_row(*cells)
    console.print(table)
    _render_issue_footer(report.issues)


@app.command()
def sweep(
    traces: Path = TRACES_ARGUMENT,
    truths: Path = TRUTHS_ARGUMENT,
    policies: list[SweepPolicy] = typer.Option(
        ...,
        "--policy",
        case_sensitive=False,
        help="Policy to include (repeatable).",
    ),
    delta_t: float = DELTA_T_OPTION,
    cp: OptionalFloat = CP_OPTION_DEFAULT,
    ratios: OptionalStr = typer.Option(None, "--ratios", help="c_p/c_c values to sweep."),
    cc_values: OptionalStr = typer.Option(None, "--cc-values", help="Corrective costs to sweep."),
    c_unav: OptionalFloat = CUNAV_OPTION_DEFAULT,
    c_inv: OptionalFloat = CINV_OPTION_DEFAULT,
    lead_time: OptionalFloat = LEAD_TIME_OPTION_DEFAULT,
    config: OptionalPath = COSTS_CONFIG_OPTION_DEFAULT,
    rbar: RbarOption = typer.Option(
        RbarOption.UPPER_BOUND_RENEWAL,
        "--rbar",
        case_sensitive=False,
        help="Cost rate pricing lost life for the opportunity policy.",
    ),
    thresholds: str = THRESHOLDS_OPTION,
    perfect_allow_failure: bool = ALLOW_FAILURE_OPTION,
    ci: CiMethod = CI_OPTION,
    fit_lognormal: bool = FIT_LOGNORMAL_OPTION,
    output: OptionalPath = typer.Option(None, "--output", "-o", help="Write the sweep CSV here."),
    output_format: str = FORMAT_OPTION_DEFAULT,
) -> None:
    """Metric per cost setting and policy, for plotting cost-ratio curves."""
    fmt = _coerce_output_format(output_format)
    if (ratios is None) == (cc_values is None):
        _usage_error("give exactly one of --ratios or --cc-values")
    with _handled_errors():
        values = parse_float_list(ratios if ratios is not None else cast(str, cc_values))
        base = _cost_values(config, c_p=cp, c_unav=c_unav, c_inv=c_inv, lead_time=lead_time)
        _require_costs(base, "c_p")
        # c_c is replaced for every swept value
        base_costs = CostModel(**base, c_c=2.0 * base["c_p"])
        fleet_traces, fleet_truths = _load_fleet(traces, truths, fit_lognormal=fit_lognormal)
        report = cost_sweep(
            fleet_traces,
            fleet_truths,
            _grid(delta_t, fleet_truths),
            base_costs,
            policies,
            ratios=values if ratios is not None else None,
            cc_values=values if cc_values is not None else None,
            options=SweepOptions(
                rbar_option=rbar,
                thresholds=ThresholdGrid.parse(thresholds),
                ci_method=ci,
                allow_failure=perfect_allow_failure,
            ),
        )
        if output is not None:
            write_sweep_csv(report, output)
            logger.info("sweep written to %s", output)
    if fmt is OutputFormat.JSON:
        _emit_json(report.to_dict())
    elif output is None:
        typer.echo(dump_sweep_csv(report), nl=False)
    else:
        _render_sweep(report)
    raise typer.Exit(code=EXIT_OK)


def _parse_candidates(raw: Sequence[str]) -> list[tuple[str, Path]]:
    candidates = []
    for item in raw:
        label, sep, path = item.partition("=")
        if not sep or not label.strip() or not path.strip():
            raise ConfigError(f"--candidate expects LABEL=PATH, got {item!r}")
        candidates.append((label.strip(), Path(path.strip())))
    repeated = duplicates(label for label, _ in candidates)
    if repeated:
        raise ConfigError(f"duplicate candidate labels: {', '.join(repeated)}")
    return candidates


@app.command()
def select(
    truths: Path = TRUTHS_ARGUMENT,
    candidate: list[str] = typer.Option(
        ...,
        "--candidate",
        help="LABEL=TRACES for one hyperparameter setting (repeatable).",
    ),
    delta_t: float = DELTA_T_OPTION,
    cp: OptionalFloat = CP_OPTION_DEFAULT,
    cc: OptionalFloat = CC_OPTION_DEFAULT,
    c_unav: OptionalFloat = CUNAV_OPTION_DEFAULT,
    c_inv: OptionalFloat = CINV_OPTION_DEFAULT,
    lead_time: OptionalFloat = LEAD_TIME_OPTION_DEFAULT,
    config: OptionalPath = COSTS_CONFIG_OPTION_DEFAULT,
    setting: Setting = SETTING_OPTION,
    policy: PolicyName = POLICY_OPTION_DEFAULT,
    p_thres: OptionalFloat = P_THRES_OPTION_DEFAULT,
    rbar: RbarOption = RBAR_OPTION_DEFAULT,
    p_order: OptionalFloat = P_ORDER_OPTION_DEFAULT,
    p_rep: OptionalFloat = P_REP_OPTION_DEFAULT,
    fit_lognormal: bool = FIT_LOGNORMAL_OPTION,
    output: OptionalPath = OUTPUT_OPTION_DEFAULT,
    output_format: str = FORMAT_OPTION_DEFAULT,
) -> None:
    """Pick the hyperparameter setting whose traces give the lowest metric."""
    fmt = _coerce_output_format(output_format)
    with _handled_errors():
        costs = _costs(config, cp, cc, c_unav, c_inv, lead_time)
        fleet_truths = read_truths(truths)
        replacement, ordering, context = _resolve_policies(
            setting,
            costs,
            fleet_truths,
            policy=policy,
            p_thres=p_thres,
            rbar=rbar,
            p_order=p_order,
            p_rep=p_rep,
        )
        candidates = []
        for label, path in _parse_candidates(candidate):
            candidate_traces = read_traces(path)
            if fit_lognormal:
                candidate_traces = fit_traces_lognormal(candidate_traces)
            candidates.append(HyperparameterCandidate(label, tuple(candidate_traces)))
        scores = score_candidates(
            candidates,
            fleet_truths,
            _grid(delta_t, fleet_truths),
            costs,
            setting=setting,
            policy=replacement,
            ordering=ordering,
        )
        best = best_candidate_index(scores)
        payload = {
            "context": {"command": "select", "setting": setting.value, **context},
            "selected": scores[best].label,
            "scores": [{"label": score.label, "m_hat": score.m_hat} for score in scores],
        }
        if output is not None:
            atomic_write_text(output, dump_json(payload))
    if fmt is OutputFormat.JSON:
        _emit_json(payload)
    else:
        table = Table(title="Hyperparameter candidates", show_header=True, header_style="bold")
        table.add_column("Candidate")
        table.add_column("M_hat", justify="right")
        for index, score in enumerate(scores):
            marker = " *" if index == best else ""
            table.add_row(f"{score.label}{marker}", format_number(score.m_hat))
        console.print(table)
        console.print(f"Selected: {scores[best].label}")
    raise typer.Exit(code=EXIT_OK)


__all__ = ["app", "main"]
