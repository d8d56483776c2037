from dataclasses import dataclass, field
from typing import List, Optional

from ..core.errors import ReportFormatError

SIGNIFICANT_PIRADS = 4
COUNT_BUCKETS = 6  # 0, 1, 2, 3, 4, 5+

STATUS_SECTIONED = "sectioned"
STATUS_STRICT = "strict-fallback"
STATUS_EMPTY = "empty"


@dataclass(frozen=True)
class Report:
    case_id: str
    body: str

    def __post_init__(self):
        if not self.body or not self.body.strip():
            raise ReportFormatError("Report body is empty", case_id=self.case_id)


@dataclass(frozen=True)
class LesionSection:
    """Report text belonging to one lesion header such as 'afwijking 2+3:'"""

    identifiers: List[int]
    text: str
    header: str = ""

    def __post_init__(self):
        if not self.identifiers or any(i < 1 for i in self.identifiers):
            raise ReportFormatError(f"Invalid lesion identifiers {self.identifiers}")


@dataclass(frozen=True)
class FindingScores:
    pirads: Optional[int] = None
    t2w: Optional[int] = None
    dwi: Optional[int] = None
    dce: Optional[str] = None  # '+' or '-'
    multiplicity: int = 1

    def __post_init__(self):
        for name in ("pirads", "t2w", "dwi"):
            value = getattr(self, name)
            if value is not None and not 1 <= value <= 5:
                raise ReportFormatError(f"{name} score {value} outside 1-5")
        if self.dce not in (None, "+", "-"):
            raise ReportFormatError(f"DCE sign must be '+' or '-', got {self.dce!r}")
        if self.multiplicity < 1:
            raise ReportFormatError("multiplicity must be positive")
        if self.pirads is None and self.t2w is None and self.dwi is None and self.dce is None:
            raise ReportFormatError("A finding needs at least one score")

    @property
    def is_significant(self) -> bool:
        return self.pirads is not None and self.pirads >= SIGNIFICANT_PIRADS

    def to_dict(self) -> dict:
        return {
            "pirads": self.pirads,
            "t2w": self.t2w,
            "dwi": self.dwi,
            "dce": self.dce,
            "multiplicity": self.multiplicity,
        }


@dataclass(frozen=True)
class ReportExtraction:
    findings: List[FindingScores]
    status: str
    n_sig: int = field(init=False)

    def __post_init__(self):
        if (self.status == STATUS_EMPTY) != (len(self.findings) == 0):
            raise ReportFormatError(f"status '{self.status}' inconsistent with {len(self.findings)} findings")
        n_sig = sum(f.multiplicity for f in self.findings if f.is_significant)
        object.__setattr__(self, "n_sig", n_sig)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "n_sig": self.n_sig,
            "findings": [f.to_dict() for f in self.findings],
        }


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] = number of cases with true count t and predicted count p (bucket 5 = '5+')"""

    counts: List[List[int]]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def correct(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.counts)))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "buckets": [str(i) for i in range(COUNT_BUCKETS - 1)] + [f"{COUNT_BUCKETS - 1}+"],
            "counts": self.counts,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
        }
