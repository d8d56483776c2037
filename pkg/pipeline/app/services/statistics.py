import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import AnnotationToolError, StatisticsError
from ..models.evaluation import FrocCurve, RocCurve, RunGroup
from .metrics import auroc, step_resample

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000
MAX_REDRAWS = 10_000

MetricFn = Callable[[np.ndarray, np.ndarray], float]
BOOTSTRAP_METRICS: Dict[str, MetricFn] = {
    "auroc": auroc,
    "mean": lambda values, labels: float(np.mean(values)),
}


def _block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent substream per (seed, block) so results do not depend on --jobs"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _blocks(iterations: int) -> List[Tuple[int, int]]:
    return [(block, min(BLOCK_SIZE, iterations - start)) for block, start in enumerate(range(0, iterations, BLOCK_SIZE))]


def _values(group: Union[RunGroup, Sequence[float]]) -> np.ndarray:
    values = group.values if isinstance(group, RunGroup) else group
    return np.asarray(values, dtype=np.float64)


@dataclass
class PermutationResult:
    statistic: float
    p: float
    iterations: int
    seed: int
    groups: Tuple[str, str]
    alpha: float = 0.01

    @property
    def significant(self) -> bool:
        return self.p < self.alpha

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p": self.p,
            "iterations": self.iterations,
            "seed": self.seed,
            "groups": list(self.groups),
            "alpha": self.alpha,
            "significant": self.significant,
        }


@dataclass
class BootstrapResult:
    metric: str
    estimate: float
    lo: float
    hi: float
    iterations: int
    seed: int
    rejected: int

    @property
    def interval(self) -> Tuple[float, float]:
        return (self.lo, self.hi)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def permutation_record(
    a: Union[RunGroup, Sequence[float]],
    b: Union[RunGroup, Sequence[float]],
    iterations: int = 10_000,
    seed: int = 0,
    alpha: float = 0.01,
    jobs: int = 1,
) -> PermutationResult:
    """One-sided permutation test of mean(a) > mean(b)."""
    values_a, values_b = _values(a), _values(b)
    if values_a.size < 2 or values_b.size < 2:
        raise StatisticsError(f"Permutation test needs at least 2 runs per group, got {values_a.size} and {values_b.size}")
    if iterations < 1:
        raise StatisticsError("Permutation test needs at least one iteration")

    pooled = np.concatenate([values_a, values_b])
    n_a = values_a.size
    observed = float(values_a.mean() - values_b.mean())
    tolerance = 1e-12 * max(1.0, float(np.abs(pooled).max()))

    def count_block(block: Tuple[int, int]) -> int:
        index, size = block
        shuffled = _block_rng(seed, index).permuted(np.tile(pooled, (size, 1)), axis=1)
        resampled = shuffled[:, :n_a].mean(axis=1) - shuffled[:, n_a:].mean(axis=1)
        # The observed arrangement is the +1 below; re-draws count only when strictly larger
        return int(np.count_nonzero(resampled > observed + tolerance))

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        exceeding = sum(executor.map(count_block, _blocks(iterations)))

    name_a = a.name if isinstance(a, RunGroup) else "a"
    name_b = b.name if isinstance(b, RunGroup) else "b"
    return PermutationResult(
        statistic=observed,
        p=(1 + exceeding) / (1 + iterations),
        iterations=iterations,
        seed=seed,
        groups=(name_a, name_b),
        alpha=alpha,
    )


def permutation_test(a, b, iterations: int = 10_000, seed: int = 0, jobs: int = 1) -> float:
    return permutation_record(a, b, iterations, seed, jobs=jobs).p


@dataclass
class SignificanceMatrix:
    groups: List[str]
    results: List[List[Optional[PermutationResult]]]
    iterations: int
    alpha: float

    @property
    def p(self) -> List[List[Optional[float]]]:
        """p[i][j] = p-value that group i outperforms group j; None on the diagonal"""
        return [[None if r is None else r.p for r in row] for row in self.results]

    @property
    def pairs(self) -> List[PermutationResult]:
        return [r for row in self.results for r in row if r is not None]

    def to_dict(self) -> dict:
        return {
            "groups": self.groups,
            "p": self.p,
            "pairs": [r.to_dict() for r in self.pairs],
            "iterations": self.iterations,
            "alpha": self.alpha,
        }


def significance_matrix(
    groups: Sequence[RunGroup],
    iterations: int = 10_000,
    seed: int = 0,
    jobs: int = 1,
    alpha: float = 0.01,
) -> SignificanceMatrix:
    """One-sided permutation test for every ordered pair of run groups."""
    if len(groups) < 2:
        raise StatisticsError(f"Need at least two run groups, got {len(groups)}")
    results = [
        [None if i == j else permutation_record(group_i, group_j, iterations, seed, alpha, jobs) for j, group_j in enumerate(groups)]
        for i, group_i in enumerate(groups)
    ]
    return SignificanceMatrix([g.name for g in groups], results, iterations, alpha)


def bootstrap(
    per_case_values: Sequence[float],
    labels: Sequence[int],
    metric: Union[str, MetricFn] = "auroc",
    iterations: int = 10_000,
    seed: int = 0,
    jobs: int = 1,
) -> BootstrapResult:
    """Bootstrap with k ~ U{1..N} cases per draw; single-class draws are redrawn."""
    values = np.asarray(per_case_values, dtype=np.float64)
    classes = np.asarray(labels)
    if values.shape != classes.shape or values.ndim != 1:
        raise StatisticsError(f"Got {values.size} values for {classes.size} labels")
    if iterations < 100:
        raise StatisticsError(f"Bootstrap needs at least 100 iterations, got {iterations}")
    if np.unique(classes).size < 2:
        raise StatisticsError("Bootstrap needs both classes present")

    if isinstance(metric, str):
        if metric not in BOOTSTRAP_METRICS:
            raise StatisticsError(f"Unknown bootstrap metric '{metric}'")
        metric_name, metric_fn = metric, BOOTSTRAP_METRICS[metric]
    else:
        metric_name, metric_fn = getattr(metric, "__name__", "custom"), metric

    n_cases = values.size

    def run_block(block: Tuple[int, int]) -> Tuple[List[float], int]:
        index, size = block
        rng = _block_rng(seed, index)
        accepted: List[float] = []
        rejected = 0
        while len(accepted) < size:
            if rejected > MAX_REDRAWS * size:
                raise StatisticsError(f"Metric '{metric_name}' undefined for every bootstrap draw")
            k = int(rng.integers(1, n_cases + 1))
            picks = rng.integers(0, n_cases, size=k)
            drawn_labels = classes[picks]
            if np.unique(drawn_labels).size < 2:
                rejected += 1
                continue
            try:
                accepted.append(float(metric_fn(values[picks], drawn_labels)))
            except AnnotationToolError:
                rejected += 1
        return accepted, rejected

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        results = list(executor.map(run_block, _blocks(iterations)))

    statistics = np.array([v for accepted, _ in results for v in accepted])
    rejected = sum(r for _, r in results)
    lo, hi = np.percentile(statistics, [2.5, 97.5])
    logger.debug("Bootstrap %s: %d draws rejected", metric_name, rejected)

    return BootstrapResult(
        metric=metric_name,
        estimate=float(metric_fn(values, classes)),
        lo=float(lo),
        hi=float(hi),
        iterations=iterations,
        seed=seed,
        rejected=rejected,
    )


def bootstrap_ci(per_case_values, labels, metric="auroc", iterations: int = 10_000, seed: int = 0) -> Tuple[float, float]:
    return bootstrap(per_case_values, labels, metric, iterations, seed).interval


def band(curves: Sequence[Union[FrocCurve, RocCurve]], grid: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise 2.5 / 50 / 97.5 percentiles of step-resampled curves on a shared grid."""
    if len(curves) < 2:
        raise StatisticsError("A confidence band needs at least two curves")
    if len(grid) == 0:
        raise StatisticsError("A confidence band needs a non-empty grid")
    resampled = np.stack([step_resample(curve, grid) for curve in curves])
    lo, median, hi = np.percentile(resampled, [2.5, 50.0, 97.5], axis=0)
    return lo, median, hi
