import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import GridMismatchError, ReportFormatError, VolumeFormatError
from ..models.lesion import (
    REASON_EMPTY_REPORT,
    REASON_INSUFFICIENT,
    STATUS_ANNOTATED,
    STATUS_EXCLUDED,
    STATUS_NEGATIVE,
    AnnotationOutcome,
    LesionCandidate,
)
from ..models.report import STATUS_EMPTY, Report
from ..models.volume import LabelVolume, Volume
from ..schemas.config import ExtractionConfig
from ..schemas.manifest import CaseRecord
from .candidate_extraction import extract_candidates
from .report_parser import ReportParser
from .volume_io import read_volume

logger = logging.getLogger(__name__)


def ensemble_average(maps: Sequence[Volume]) -> Volume:
    """Voxelwise mean of ensemble confidence maps."""
    if not maps:
        raise VolumeFormatError("Cannot average an empty list of confidence maps")
    reference = maps[0]
    for other in maps[1:]:
        if not reference.same_grid(other):
            raise GridMismatchError(
                f"Ensemble members differ: {reference.dims}/{reference.spacing_mm} vs {other.dims}/{other.spacing_mm}"
            )
    if len(maps) == 1:
        return reference

    stacked = np.stack([m.data.astype(np.float64) for m in maps])
    mean = np.clip(stacked.mean(axis=0), 0.0, 1.0)
    return Volume(mean, reference.spacing_mm, kind="confidence")


def boundary_order(candidates: Sequence[LesionCandidate], ranking: str = "peak") -> List[LesionCandidate]:
    """Rank order with ties broken by larger volume, then lower peak index"""
    return sorted(candidates, key=lambda c: (-c.score(ranking), -c.n_voxels, c.peak_index))


def mask_candidates(candidates: Sequence[LesionCandidate], n_sig: int) -> List[LesionCandidate]:
    """Keep only the n_sig highest ranked candidates (report masking)."""
    return list(candidates[:max(n_sig, 0)])


def report_guided_annotation(
    candidates: Sequence[LesionCandidate],
    n_sig: int,
    dims,
    spacing_mm,
    case_id: str = "",
    ranking: str = "peak",
    connectivity: int = 26,
) -> AnnotationOutcome:
    """Keep the n_sig most confident candidates as the voxel-level label."""
    if n_sig < 0:
        raise ReportFormatError(f"n_sig must be non-negative, got {n_sig}", case_id=case_id)
    for candidate in candidates:
        if tuple(candidate.dims) != tuple(dims):
            raise GridMismatchError(f"Candidate grid {candidate.dims} differs from {tuple(dims)}", case_id=case_id)

    ordered = boundary_order(candidates, ranking)

    if n_sig == 0:
        return AnnotationOutcome(
            case_id=case_id,
            status=STATUS_NEGATIVE,
            n_sig=0,
            mask=LabelVolume.empty(dims, spacing_mm, connectivity),
            n_candidates=len(ordered),
        )

    if len(ordered) < n_sig:
        logger.info("Case %s excluded: %d candidates for %d significant findings", case_id, len(ordered), n_sig)
        return AnnotationOutcome(
            case_id=case_id,
            status=STATUS_EXCLUDED,
            n_sig=n_sig,
            reason=REASON_INSUFFICIENT,
            n_candidates=len(ordered),
        )

    kept = ordered[:n_sig]
    nx, ny, nz = dims
    flat = np.zeros(nx * ny * nz, dtype=np.int32)
    for label, candidate in enumerate(kept, start=1):
        flat[candidate.voxels] = label

    return AnnotationOutcome(
        case_id=case_id,
        status=STATUS_ANNOTATED,
        n_sig=n_sig,
        mask=LabelVolume(flat.reshape(nz, ny, nx), spacing_mm, connectivity),
        kept=kept,
        n_candidates=len(ordered),
    )


class AnnotationPipeline:
    """Ensemble -> candidates -> report count -> automatic annotation"""

    def __init__(self, extraction: Optional[ExtractionConfig] = None, language: str = "bilingual"):
        self.extraction = extraction or ExtractionConfig()
        self.parser = ReportParser(language)

    def load_confidence(self, record: CaseRecord) -> Volume:
        return ensemble_average([read_volume(path) for path in record.volume_paths])

    def candidates(self, record: CaseRecord, confidence: Optional[Volume] = None) -> List[LesionCandidate]:
        if confidence is None:
            confidence = self.load_confidence(record)
        return extract_candidates(confidence, self.extraction)

    def annotate_case(self, record: CaseRecord) -> AnnotationOutcome:
        """Full pipeline for one manifest record."""
        return self.run_case(record)[1]

    def run_case(self, record: CaseRecord) -> Tuple[List[LesionCandidate], AnnotationOutcome]:
        """Candidates in boundary order plus the annotation outcome for one record."""
        confidence = self.load_confidence(record)
        return self.annotate_candidates(
            record, extract_candidates(confidence, self.extraction), confidence.dims, confidence.spacing_mm,
        )

    def annotate_candidates(
        self,
        record: CaseRecord,
        candidates: Sequence[LesionCandidate],
        dims,
        spacing_mm,
    ) -> Tuple[List[LesionCandidate], AnnotationOutcome]:
        """Annotate from candidates extracted earlier; no volume is read."""
        candidates = boundary_order(candidates, self.extraction.ranking)

        report_status = None
        if record.n_sig_override is not None:
            n_sig = record.n_sig_override
        else:
            text = record.report_text()
            extraction = self.parser.extract(Report(record.case_id, text)) if text and text.strip() else None
            report_status = extraction.status if extraction else STATUS_EMPTY
            if extraction is None or extraction.status == STATUS_EMPTY:
                logger.info("Case %s excluded: no scores in report", record.case_id)
                return candidates, AnnotationOutcome(
                    case_id=record.case_id,
                    status=STATUS_EXCLUDED,
                    n_sig=0,
                    reason=REASON_EMPTY_REPORT,
                    n_candidates=len(candidates),
                    report_status=report_status,
                )
            n_sig = extraction.n_sig

        outcome = report_guided_annotation(
            candidates,
            n_sig,
            dims,
            spacing_mm,
            case_id=record.case_id,
            ranking=self.extraction.ranking,
            connectivity=self.extraction.connectivity,
        )
        outcome.report_status = report_status
        return candidates, outcome


def annotate_case(record: CaseRecord, cfg: Optional[ExtractionConfig] = None, language: str = "bilingual") -> AnnotationOutcome:
    return AnnotationPipeline(cfg, language).annotate_case(record)
