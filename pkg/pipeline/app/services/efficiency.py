import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from ..core.errors import EfficiencyError
from ..models.evaluation import BudgetPoint

logger = logging.getLogger(__name__)


def aggregate_runs(n_manual: float, values: Sequence[float], metric: str = "auroc", how: str = "mean") -> BudgetPoint:
    """Collapse repeated-run performances of one annotation budget into a single point."""
    if len(values) == 0:
        raise EfficiencyError(f"No runs for budget {n_manual}")
    if how == "mean":
        performance = float(np.mean(values))
    elif how == "median":
        performance = float(np.median(values))
    else:
        raise EfficiencyError(f"Unknown run aggregation '{how}'")
    return BudgetPoint(n_manual=n_manual, performance=performance, metric=metric)


def _log_interpolate(n_a: float, n_b: float, perf_a: float, perf_b: float, target: float) -> float:
    exponent = (target - perf_a) / (perf_b - perf_a)
    return n_a * (n_b / n_a) ** exponent


def required_annotations(points: Sequence[BudgetPoint], perf_supervised: float) -> float:
    """Manual annotations at which the log-interpolated budget curve reaches perf_supervised."""
    if len(points) < 2:
        raise EfficiencyError("Need at least two budget points to interpolate")
    ordered = sorted(points, key=lambda p: p.n_manual)
    performances = [p.performance for p in ordered]
    if not min(performances) <= perf_supervised <= max(performances):
        raise EfficiencyError(
            f"Target performance {perf_supervised} outside observed range "
            f"[{min(performances)}, {max(performances)}]; no extrapolation"
        )

    brackets: List[Tuple[BudgetPoint, BudgetPoint]] = []
    for a, b in zip(ordered, ordered[1:]):
        low, high = sorted((a.performance, b.performance))
        if low <= perf_supervised <= high:
            brackets.append((a, b))

    usable = [(a, b) for a, b in brackets if a.performance != b.performance]
    if not usable:
        raise EfficiencyError(f"Only flat brackets contain performance {perf_supervised}")

    estimates = [_log_interpolate(a.n_manual, b.n_manual, a.performance, b.performance, perf_supervised) for a, b in usable]
    if len(set(round(e, 9) for e in estimates)) > 1:
        logger.warning(
            "Performance %.4f is reached in %d budget brackets (non-monotone points); using the lowest budget",
            perf_supervised, len(usable),
        )
    return estimates[0]


def efficiency_ratio(n_supervised: float, n_semi: float) -> float:
    """R = N_supervised / N_semi-supervised."""
    if n_supervised <= 0 or n_semi <= 0:
        raise EfficiencyError(f"Annotation counts must be positive, got {n_supervised} and {n_semi}")
    return n_supervised / n_semi


def performance_at(points: Sequence[BudgetPoint], n_manual: float) -> float:
    """Performance of the piecewise log-linear interpolant at a budget inside the observed range."""
    ordered = sorted(points, key=lambda p: p.n_manual)
    if not ordered[0].n_manual <= n_manual <= ordered[-1].n_manual:
        raise EfficiencyError(f"Budget {n_manual} outside observed range; no extrapolation")
    for a, b in zip(ordered, ordered[1:]):
        if a.n_manual <= n_manual <= b.n_manual:
            if a.n_manual == b.n_manual:
                return a.performance
            fraction = math.log(n_manual / a.n_manual) / math.log(b.n_manual / a.n_manual)
            return a.performance + fraction * (b.performance - a.performance)
    return ordered[-1].performance


def interpolate_curve(points: Sequence[BudgetPoint], samples_per_segment: int = 10) -> List[Tuple[float, float]]:
    """Samples of the interpolant, evenly spaced in log(n) within each segment."""
    if len(points) < 2:
        raise EfficiencyError("Need at least two budget points to interpolate")
    if samples_per_segment < 1:
        raise EfficiencyError("samples_per_segment must be positive")
    ordered = sorted(points, key=lambda p: p.n_manual)

    samples: List[Tuple[float, float]] = [(float(ordered[0].n_manual), ordered[0].performance)]
    for a, b in zip(ordered, ordered[1:]):
        for step in range(1, samples_per_segment + 1):
            n = float(np.exp(np.log(a.n_manual) + step / samples_per_segment * np.log(b.n_manual / a.n_manual)))
            fraction = step / samples_per_segment
            samples.append((n, a.performance + fraction * (b.performance - a.performance)))
    return samples
