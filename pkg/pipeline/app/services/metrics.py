import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from ..core.errors import GridMismatchError, MetricError, UnreachableOperatingPoint
from ..models.evaluation import (
    DscSummary,
    FrocCurve,
    LesionDice,
    LocalisationSummary,
    MatchResult,
    RocCurve,
)
from ..models.lesion import STATUS_EXCLUDED, AnnotationOutcome, LesionCandidate
from ..models.volume import LabelVolume, Volume
from .volume_io import voxel_volume_cm3

logger = logging.getLogger(__name__)

Curve = Union[FrocCurve, RocCurve]
MaskLike = Union[np.ndarray, Volume, LabelVolume]


def _overlap(intersection: np.ndarray, size_a: int, sizes_b: np.ndarray, criterion: str) -> np.ndarray:
    intersection = intersection.astype(np.float64)
    if criterion == "iou":
        union = size_a + sizes_b - intersection
        return np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)
    if criterion == "dice":
        total = size_a + sizes_b
        return np.divide(2.0 * intersection, total, out=np.zeros_like(intersection), where=total > 0)
    raise MetricError(f"Unknown overlap criterion '{criterion}'")


def match_candidates(
    candidates: Sequence[LesionCandidate],
    gt: LabelVolume,
    hit_threshold: float = 0.10,
    criterion: str = "iou",
) -> MatchResult:
    """Greedy one-to-one matching in candidate rank order."""
    n_labels = gt.num_labels
    gt_flat = gt.flat
    sizes = gt.label_sizes().astype(np.float64)
    claimed = np.zeros(n_labels + 1, dtype=bool)
    claimed[0] = True

    pairs: List[Tuple[int, int, float]] = []
    unmatched: List[int] = []
    for rank, candidate in enumerate(candidates):
        if tuple(candidate.dims) != gt.dims:
            raise GridMismatchError(f"Candidate grid {candidate.dims} differs from ground truth {gt.dims}")
        if n_labels == 0:
            unmatched.append(rank)
            continue

        intersection = np.bincount(gt_flat[candidate.voxels], minlength=n_labels + 1)
        overlap = _overlap(intersection, candidate.n_voxels, sizes, criterion)
        overlap[claimed] = -1.0
        overlap[intersection == 0] = -1.0

        best = int(np.argmax(overlap))
        if overlap[best] >= hit_threshold:
            claimed[best] = True
            pairs.append((rank, best, float(overlap[best])))
        else:
            unmatched.append(rank)

    unmatched_gt = [label for label in range(1, n_labels + 1) if not claimed[label]]
    return MatchResult(pairs=pairs, unmatched_candidates=unmatched, unmatched_gt=unmatched_gt)


def froc(
    cases: Sequence[Tuple[Sequence[LesionCandidate], LabelVolume]],
    hit_threshold: float = 0.10,
    criterion: str = "iou",
    ranking: str = "peak",
) -> FrocCurve:
    """Lesion-level FROC from per-case (candidates, ground truth) pairs."""
    if not cases:
        raise MetricError("FROC needs at least one case")

    hit_scores: List[float] = []
    fp_scores: List[float] = []
    n_lesions = 0
    for candidates, gt in cases:
        result = match_candidates(candidates, gt, hit_threshold, criterion)
        n_lesions += gt.num_labels
        hit_scores.extend(candidates[rank].score(ranking) for rank, _, _ in result.pairs)
        fp_scores.extend(candidates[rank].score(ranking) for rank in result.unmatched_candidates)

    if n_lesions == 0:
        raise MetricError("FROC is undefined without ground-truth lesions")

    hits = np.sort(np.asarray(hit_scores, dtype=np.float64))
    fps = np.sort(np.asarray(fp_scores, dtype=np.float64))
    thresholds = sorted(set(hit_scores) | set(fp_scores), reverse=True)

    points = []
    for t in thresholds:
        n_hits = hits.size - np.searchsorted(hits, t, side="left")
        n_fps = fps.size - np.searchsorted(fps, t, side="left")
        points.append((float(n_fps) / len(cases), float(n_hits) / n_lesions))

    return FrocCurve(points=points, thresholds=[float(t) for t in thresholds], n_cases=len(cases), n_lesions=n_lesions)


def step_value(curve: Curve, x: float) -> float:
    """Right-continuous step lookup: y of the last point with x_i <= x, 0 before the first point."""
    xs = np.asarray(curve.xs, dtype=np.float64)
    position = int(np.searchsorted(xs, x, side="right")) - 1
    return float(curve.ys[position]) if position >= 0 else 0.0


def step_resample(curve: Curve, grid: Sequence[float]) -> np.ndarray:
    return np.array([step_value(curve, g) for g in grid], dtype=np.float64)


def pauc(curve: FrocCurve, lo: float = 0.0, hi: float = 1.0) -> float:
    """Area under the step FROC curve between lo and hi false positives per case."""
    if lo >= hi:
        raise MetricError(f"pAUC range needs lo < hi, got [{lo}, {hi}]")
    if not curve.points:
        raise MetricError("pAUC of an empty curve")

    breaks = [lo] + [x for x in curve.xs if lo < x < hi] + [hi]
    breaks = sorted(set(breaks))
    area = 0.0
    for left, right in zip(breaks, breaks[1:]):
        area += (right - left) * step_value(curve, left)
    return area


def _binary_labels(scores: Sequence[float], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    scores_arr = np.asarray(scores, dtype=np.float64)
    labels_arr = np.asarray(labels)
    if scores_arr.shape != labels_arr.shape or scores_arr.ndim != 1:
        raise MetricError(f"Got {scores_arr.size} scores for {labels_arr.size} labels")
    if not np.all((labels_arr == 0) | (labels_arr == 1)):
        raise MetricError("Case labels must be 0 or 1")
    labels_arr = labels_arr.astype(bool)
    if labels_arr.all() or not labels_arr.any():
        raise MetricError("AUROC needs both positive and negative cases")
    return scores_arr, labels_arr


def auroc(case_scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUROC; tied scores count one half."""
    scores, positive = _binary_labels(case_scores, labels)
    ranks = rankdata(scores, method="average")
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    u_statistic = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def roc(case_scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """Case-level ROC curve, one point per distinct score."""
    scores, positive = _binary_labels(case_scores, labels)
    n_pos = positive.sum()
    n_neg = positive.size - n_pos

    points = [(0.0, 0.0)]
    thresholds: List[Optional[float]] = [None]
    for t in sorted(set(scores.tolist()), reverse=True):
        selected = scores >= t
        points.append((float((selected & ~positive).sum() / n_neg), float((selected & positive).sum() / n_pos)))
        thresholds.append(float(t))
    return RocCurve(points=points, thresholds=thresholds)


def case_score(candidates: Sequence[LesionCandidate]) -> float:
    """Case-level likelihood: most confident candidate peak, 0 without candidates."""
    return max((c.peak_confidence for c in candidates), default=0.0)


def _as_mask(mask: MaskLike) -> np.ndarray:
    if isinstance(mask, (Volume, LabelVolume)):
        return mask.data != 0
    return np.asarray(mask) != 0


def dice(a: MaskLike, b: MaskLike) -> float:
    """Dice similarity coefficient; two empty masks agree perfectly."""
    mask_a, mask_b = _as_mask(a), _as_mask(b)
    if mask_a.shape != mask_b.shape:
        raise GridMismatchError(f"Dice needs equal grids, got {mask_a.shape} and {mask_b.shape}")
    total = int(mask_a.sum()) + int(mask_b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(mask_a, mask_b).sum()) / total


def dsc_report(
    outcomes: Sequence[AnnotationOutcome],
    gts: Sequence[LabelVolume],
    include_missed: bool = False,
    hit_threshold: float = 0.10,
    criterion: str = "iou",
) -> DscSummary:
    """Per-lesion DSC of automatic annotations; missed lesions count as 0 when include_missed."""
    if len(outcomes) != len(gts):
        raise MetricError(f"Got {len(outcomes)} outcomes for {len(gts)} ground truths")

    per_lesion: List[LesionDice] = []
    for outcome, gt in zip(outcomes, gts):
        if outcome.status == STATUS_EXCLUDED:
            continue
        result = match_candidates(outcome.kept, gt, hit_threshold, criterion)
        lesion_volume = voxel_volume_cm3(gt.spacing_mm)
        sizes = gt.label_sizes()

        for rank, label, _ in result.pairs:
            score = dice(outcome.kept[rank].mask(), gt.lesion_mask(label))
            per_lesion.append(LesionDice(outcome.case_id, label, score, float(sizes[label] * lesion_volume), True))
        if include_missed:
            for label in result.unmatched_gt:
                per_lesion.append(LesionDice(outcome.case_id, label, 0.0, float(sizes[label] * lesion_volume), False))

    per_lesion.sort(key=lambda d: (d.case_id, d.gt_label))
    if not per_lesion:
        return DscSummary(mean=None, std=None, per_lesion=[], include_missed=include_missed)
    values = np.array([d.dsc for d in per_lesion])
    return DscSummary(mean=float(values.mean()), std=float(values.std()), per_lesion=per_lesion, include_missed=include_missed)


def localisation_summary(
    case_candidates: Sequence[Sequence[LesionCandidate]],
    gts: Sequence[LabelVolume],
    hit_threshold: float = 0.10,
    criterion: str = "iou",
    n_excluded: int = 0,
) -> LocalisationSummary:
    """Sensitivity and false positives per case of fixed candidate sets (no threshold sweep)."""
    if len(case_candidates) != len(gts):
        raise MetricError(f"Got {len(case_candidates)} candidate sets for {len(gts)} ground truths")

    hits = lesions = false_positives = 0
    for candidates, gt in zip(case_candidates, gts):
        result = match_candidates(candidates, gt, hit_threshold, criterion)
        hits += result.n_hits
        lesions += gt.num_labels
        false_positives += len(result.unmatched_candidates)

    n_cases = len(gts)
    return LocalisationSummary(
        sensitivity=hits / lesions if lesions else 0.0,
        fp_per_case=false_positives / n_cases if n_cases else 0.0,
        n_hits=hits,
        n_lesions=lesions,
        n_false_positives=false_positives,
        n_cases=n_cases,
        n_excluded=n_excluded,
    )


def operating_point(curve: Curve, kind: str, value: float) -> float:
    """Read sensitivity at a false-positive level, or specificity at a sensitivity."""
    if not curve.points:
        raise UnreachableOperatingPoint("Operating point of an empty curve")

    if kind == "sens_at_fp":
        if value < 0:
            raise UnreachableOperatingPoint(f"False-positive level {value} is negative")
        return step_value(curve, value)

    if kind == "spec_at_sens":
        if not isinstance(curve, RocCurve):
            raise UnreachableOperatingPoint("spec_at_sens needs a ROC curve")
        reachable = [1.0 - fpr for fpr, tpr in curve.points if tpr >= value]
        if not reachable:
            raise UnreachableOperatingPoint(f"Sensitivity {value} is never reached")
        return max(reachable)

    raise UnreachableOperatingPoint(f"Unknown operating point kind '{kind}'")
