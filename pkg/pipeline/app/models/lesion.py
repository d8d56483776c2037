from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .volume import LabelVolume

STATUS_ANNOTATED = "annotated"
STATUS_EXCLUDED = "excluded"
STATUS_NEGATIVE = "negative"

REASON_EMPTY_REPORT = "empty-report"
REASON_INSUFFICIENT = "insufficient-candidates"


@dataclass(frozen=True, eq=False)
class LesionCandidate:
    """Connected voxel set grown from a confidence peak"""

    voxels: np.ndarray  # sorted linear (x-fastest) indices
    peak_index: int
    peak_confidence: float
    volume_cm3: float
    mean_confidence: float
    dims: Tuple[int, int, int]

    def __post_init__(self):
        voxels = np.unique(np.asarray(self.voxels, dtype=np.int64))
        voxels.setflags(write=False)
        object.__setattr__(self, "voxels", voxels)

    @property
    def n_voxels(self) -> int:
        return int(self.voxels.size)

    def score(self, ranking: str = "peak") -> float:
        return self.mean_confidence if ranking == "mean" else self.peak_confidence

    def mask(self) -> np.ndarray:
        """Boolean (nz, ny, nx) mask of the candidate."""
        nx, ny, nz = self.dims
        flat = np.zeros(nx * ny * nz, dtype=bool)
        flat[self.voxels] = True
        return flat.reshape(nz, ny, nx)


@dataclass
class AnnotationOutcome:
    case_id: str
    status: str
    n_sig: int
    mask: Optional[LabelVolume] = None
    kept: List[LesionCandidate] = field(default_factory=list)
    reason: Optional[str] = None
    n_candidates: int = 0
    report_status: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "status": self.status,
            "reason": self.reason,
            "n_sig": self.n_sig,
            "n_candidates": self.n_candidates,
            "n_labels": self.mask.num_labels if self.mask is not None else None,
            "kept_peaks": [round(float(c.peak_confidence), 6) for c in self.kept],
            "report_status": self.report_status,
        }
