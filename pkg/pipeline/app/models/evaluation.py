from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ..core.errors import EfficiencyError, MetricError, StatisticsError


@dataclass
class MatchResult:
    pairs: List[Tuple[int, int, float]]  # (candidate rank, gt label, overlap)
    unmatched_candidates: List[int]
    unmatched_gt: List[int]

    @property
    def n_hits(self) -> int:
        return len(self.pairs)


@dataclass
class FrocCurve:
    """(fp_per_case, sensitivity) points, one per distinct candidate confidence"""

    points: List[Tuple[float, float]]
    thresholds: List[float] = field(default_factory=list)
    n_cases: int = 0
    n_lesions: int = 0

    def __post_init__(self):
        for (fp_a, sens_a), (fp_b, sens_b) in zip(self.points, self.points[1:]):
            if fp_b < fp_a or sens_b < sens_a:
                raise MetricError("FROC points must be sorted with non-decreasing sensitivity")

    @property
    def xs(self) -> List[float]:
        return [p[0] for p in self.points]

    @property
    def ys(self) -> List[float]:
        return [p[1] for p in self.points]

    def to_rows(self) -> List[dict]:
        return [
            {"threshold": t, "fp_per_case": fp, "sensitivity": sens}
            for t, (fp, sens) in zip(self.thresholds, self.points)
        ]


@dataclass
class RocCurve:
    """(fpr, tpr) points from (0, 0) to (1, 1)"""

    points: List[Tuple[float, float]]
    thresholds: List[Optional[float]] = field(default_factory=list)

    @property
    def xs(self) -> List[float]:
        return [p[0] for p in self.points]

    @property
    def ys(self) -> List[float]:
        return [p[1] for p in self.points]

    def to_rows(self) -> List[dict]:
        return [
            {"threshold": t, "fpr": fpr, "tpr": tpr}
            for t, (fpr, tpr) in zip(self.thresholds, self.points)
        ]


@dataclass
class LesionDice:
    case_id: str
    gt_label: int
    dsc: float
    volume_cm3: float
    matched: bool

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "gt_label": self.gt_label,
            "dsc": self.dsc,
            "volume_cm3": self.volume_cm3,
            "matched": self.matched,
        }


@dataclass
class DscSummary:
    mean: Optional[float]
    std: Optional[float]
    per_lesion: List[LesionDice]
    include_missed: bool

    @property
    def volume_dsc_pairs(self) -> List[Tuple[float, float]]:
        return [(d.volume_cm3, d.dsc) for d in self.per_lesion]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "n_lesions": len(self.per_lesion),
            "include_missed": self.include_missed,
            "per_lesion": [d.to_dict() for d in self.per_lesion],
        }


@dataclass
class LocalisationSummary:
    sensitivity: float
    fp_per_case: float
    n_hits: int
    n_lesions: int
    n_false_positives: int
    n_cases: int
    n_excluded: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RunGroup:
    """Metric values of independent runs for one configuration"""

    name: str
    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise StatisticsError(f"Run group '{self.name}' is empty")


@dataclass(frozen=True)
class BudgetPoint:
    n_manual: float
    performance: float
    metric: str = "auroc"

    def __post_init__(self):
        if self.n_manual < 1:
            raise EfficiencyError(f"n_manual must be at least 1, got {self.n_manual}")
        if self.metric not in ("auroc", "pauc"):
            raise EfficiencyError(f"Unknown performance metric '{self.metric}'")
