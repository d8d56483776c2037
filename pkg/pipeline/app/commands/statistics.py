import argparse
import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..core.errors import ConfigurationError
from ..models.evaluation import RunGroup
from ..services.efficiency import (
    aggregate_runs,
    efficiency_ratio,
    interpolate_curve,
    performance_at,
    required_annotations,
)
from ..services.statistics import bootstrap, significance_matrix
from ..utils.serialization import read_csv, write_csv, write_json
from .common import EXIT_OK, add_common_flags, build_context

logger = logging.getLogger(__name__)

Model = TypeVar("Model", bound=BaseModel)


class RunGroupsInput(BaseModel):
    """{"groups": {"name": [metric per run, ...], ...}}"""

    model_config = ConfigDict(extra="forbid")

    groups: Dict[str, List[float]] = Field(..., min_length=2)


class BootstrapInput(BaseModel):
    model_config = ConfigDict(extra="forbid")

    values: List[float] = Field(..., min_length=2)
    labels: List[int] = Field(..., min_length=2)
    metric: Literal["auroc", "mean"] = "auroc"


class BudgetRuns(BaseModel):
    n_manual: float = Field(..., ge=1)
    values: List[float] = Field(..., min_length=1)


class SupervisedReference(BaseModel):
    n_manual: float = Field(..., gt=0)
    performance: float


class EfficiencyInput(BaseModel):
    model_config = ConfigDict(extra="forbid")

    metric: Literal["auroc", "pauc"] = "auroc"
    budgets: List[BudgetRuns] = Field(..., min_length=2)
    supervised: SupervisedReference
    samples_per_segment: int = Field(10, ge=1)


def _validate(model: Type[Model], payload, path: Path) -> Model:
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid input {path}: {e}") from e


def _read_json(path: Path):
    try:
        with Path(path).open("r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise ConfigurationError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}") from e


def _read_input(path: Path, model: Type[Model]) -> Model:
    return _validate(model, _read_json(path), path)


def _budget_rows(path: Path) -> List[dict]:
    """CSV with one n_manual,performance row per run; runs of one budget are grouped"""
    try:
        rows = read_csv(path)
    except OSError as e:
        raise ConfigurationError(f"Cannot read {path}: {e}") from e

    grouped: Dict[float, List[float]] = {}
    try:
        for row in rows:
            grouped.setdefault(float(row["n_manual"]), []).append(float(row["performance"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"{path} needs numeric n_manual and performance columns ({e})") from e
    return [{"n_manual": n, "values": values} for n, values in grouped.items()]


def _efficiency_input(args: argparse.Namespace) -> EfficiencyInput:
    """JSON or CSV budgets; the reference flags fill in or override the supervised entry"""
    if args.budgets.suffix.lower() == ".csv":
        payload = {"budgets": _budget_rows(args.budgets), "supervised": {}}
    else:
        payload = _read_json(args.budgets)
        if not isinstance(payload, dict):
            raise ConfigurationError(f"{args.budgets} must hold a JSON object")

    supervised = dict(payload.get("supervised") or {})
    if args.supervised_n is not None:
        supervised["n_manual"] = args.supervised_n
    if args.supervised_performance is not None:
        supervised["performance"] = args.supervised_performance
    payload["supervised"] = supervised
    if args.metric is not None:
        payload["metric"] = args.metric
    return _validate(EfficiencyInput, payload, args.budgets)


def register(subparsers) -> None:
    permtest = subparsers.add_parser("permtest", help="pairwise one-sided permutation tests between run groups")
    permtest.add_argument("runs", type=Path, help='JSON: {"groups": {"name": [values]}}')
    permtest.add_argument("--iterations", type=int)
    permtest.add_argument("--alpha", type=float)
    add_common_flags(permtest)
    permtest.set_defaults(handler=run_permtest)

    boot = subparsers.add_parser("bootstrap", help="bootstrap confidence interval of a case-level metric")
    boot.add_argument("values", type=Path, help='JSON: {"values": [...], "labels": [...], "metric": "auroc"}')
    boot.add_argument("--iterations", type=int)
    add_common_flags(boot)
    boot.set_defaults(handler=run_bootstrap)

    efficiency = subparsers.add_parser("efficiency", help="annotation-efficiency ratio from budget curves")
    efficiency.add_argument(
        "budgets", type=Path, help="CSV (n_manual,performance per run) or JSON with budgets and the supervised reference",
    )
    efficiency.add_argument("--supervised-n", type=float, help="manual annotations behind the supervised reference")
    efficiency.add_argument("--supervised-performance", type=float, help="performance the semi-supervised curve must match")
    efficiency.add_argument("--metric", choices=["auroc", "pauc"])
    add_common_flags(efficiency)
    efficiency.set_defaults(handler=run_efficiency)


def _stats_overrides(args: argparse.Namespace, iterations_field: str) -> dict:
    stats: Dict[str, object] = {}
    if getattr(args, "iterations", None) is not None:
        stats[iterations_field] = args.iterations
    if getattr(args, "alpha", None) is not None:
        stats["alpha"] = args.alpha
    return {"stats": stats} if stats else {}


def run_permtest(args: argparse.Namespace) -> int:
    context = build_context(args, _stats_overrides(args, "permutation_iterations"))
    data = _read_input(args.runs, RunGroupsInput)
    stats = context.config.stats
    groups = [RunGroup(name, tuple(values)) for name, values in data.groups.items()]

    matrix = significance_matrix(
        groups, stats.permutation_iterations, context.config.seed, context.config.jobs, stats.alpha,
    )
    write_json(matrix.to_dict(), context.out_dir / "permtest.json")
    for pair in matrix.pairs:
        if pair.significant:
            logger.info("%s > %s (p = %.4g)", *pair.groups, pair.p)
    return EXIT_OK


def run_bootstrap(args: argparse.Namespace) -> int:
    context = build_context(args, _stats_overrides(args, "bootstrap_iterations"))
    data = _read_input(args.values, BootstrapInput)
    result = bootstrap(
        data.values,
        data.labels,
        data.metric,
        context.config.stats.bootstrap_iterations,
        context.config.seed,
        context.config.jobs,
    )
    write_json(result.to_dict(), context.out_dir / "bootstrap.json")
    logger.info("%s = %.4f, 95%% CI [%.4f, %.4f]", result.metric, result.estimate, result.lo, result.hi)
    return EXIT_OK


def run_efficiency(args: argparse.Namespace) -> int:
    context = build_context(args)
    data = _efficiency_input(args)
    how = context.config.stats.run_aggregation

    points = [aggregate_runs(b.n_manual, b.values, data.metric, how) for b in data.budgets]
    n_semi = required_annotations(points, data.supervised.performance)
    ratio = efficiency_ratio(data.supervised.n_manual, n_semi)

    # Semi-supervised curve at the supervised budget, when that budget was measured around
    at_supervised_budget = None
    budgets = [p.n_manual for p in points]
    if min(budgets) <= data.supervised.n_manual <= max(budgets):
        at_supervised_budget = performance_at(points, data.supervised.n_manual)

    write_csv(
        [{"n_manual": n, "performance": p} for n, p in interpolate_curve(points, data.samples_per_segment)],
        context.out_dir / "efficiency_curve.csv",
        ["n_manual", "performance"],
    )
    write_json({
        "metric": data.metric,
        "aggregation": how,
        "points": [{"n_manual": p.n_manual, "performance": p.performance} for p in points],
        "supervised": data.supervised.model_dump(),
        "n_semi_supervised": n_semi,
        "ratio": ratio,
        "performance_at_supervised_budget": at_supervised_budget,
    }, context.out_dir / "efficiency.json")
    logger.info("Efficiency ratio %.3f (%.1f manual annotations)", ratio, n_semi)
    return EXIT_OK
