import logging
from typing import List, Optional

import cv2
import numpy as np
from scipy import ndimage

from ..core.errors import ExtractionError
from ..models.lesion import LesionCandidate
from ..models.volume import Volume
from ..schemas.config import ExtractionConfig
from .volume_io import label_ordered, structuring_element, voxel_volume_cm3

logger = logging.getLogger(__name__)

OTSU_BINS = 256


def _require_confidence(conf: Volume) -> None:
    if not isinstance(conf, Volume) or conf.kind != "confidence":
        raise ExtractionError("Candidate extraction needs a confidence volume")


def _make_candidate(values: np.ndarray, voxels: np.ndarray, conf: Volume) -> LesionCandidate:
    """values: float64 flat confidence; voxels: sorted linear indices"""
    local = values[voxels]
    peak_position = int(np.argmax(local))
    return LesionCandidate(
        voxels=voxels,
        peak_index=int(voxels[peak_position]),
        peak_confidence=float(local[peak_position]),
        volume_cm3=voxels.size * voxel_volume_cm3(conf.spacing_mm),
        mean_confidence=float(local.mean()),
        dims=conf.dims,
    )


def rank_candidates(candidates: List[LesionCandidate], ranking: str = "peak") -> List[LesionCandidate]:
    """Order by ranking score descending; ties by lowest peak index"""
    return sorted(candidates, key=lambda c: (-c.score(ranking), c.peak_index))


def _touches(region: np.ndarray, removed: np.ndarray, structure: np.ndarray) -> bool:
    """True if region borders (or overlaps) voxels already taken out of the working map"""
    bounds = ndimage.find_objects(region.astype(np.int8))[0]
    box = tuple(slice(max(s.start - 1, 0), s.stop + 1) for s in bounds)
    grown = ndimage.binary_dilation(region[box], structure=structure)
    return bool(np.any(removed[box] & grown))


def extract_dynamic(conf: Volume, cfg: Optional[ExtractionConfig] = None) -> List[LesionCandidate]:
    """Iteratively grow a candidate from the global peak down to rel_threshold of that peak.

    Each grown region is zeroed in a working copy before the next peak search. Regions of
    min_voxels or fewer are dropped without counting toward max_lesions. With
    cfg.remove_adjacent, so is a region that borders voxels removed earlier: it is the
    tail left around a previous peak, not a lesion of its own.
    """
    _require_confidence(conf)
    cfg = cfg or ExtractionConfig()
    structure = structuring_element(cfg.connectivity)

    values = conf.data.astype(np.float64)
    work = values.copy()
    removed = np.zeros(work.shape, dtype=bool)
    flat_values = values.ravel()
    flat_work = work.ravel()
    flat_removed = removed.ravel()

    candidates: List[LesionCandidate] = []
    discarded = adjacent = 0
    while len(candidates) < cfg.max_lesions:
        peak_index = int(np.argmax(flat_work))
        peak = float(flat_work[peak_index])
        if peak <= 0.0 or peak < cfg.min_peak:
            break

        labels, _ = ndimage.label(work >= cfg.rel_threshold * peak, structure=structure)
        region = labels == labels.flat[peak_index]
        voxels = np.flatnonzero(region)
        touching = cfg.remove_adjacent and _touches(region, removed, structure)

        # Removed from the working map whether kept or not, so the peak is never revisited
        flat_work[voxels] = 0.0
        flat_removed[voxels] = True

        if touching:
            adjacent += 1
            continue
        if voxels.size <= cfg.min_voxels:
            discarded += 1
            continue
        candidates.append(_make_candidate(flat_values, voxels, conf))

    if discarded or adjacent:
        logger.debug(
            "Dropped %d regions of %d voxels or fewer and %d regions adjacent to earlier ones",
            discarded, cfg.min_voxels, adjacent,
        )
    return candidates


def _islands(conf: Volume, threshold: float, cfg: ExtractionConfig) -> List[LesionCandidate]:
    values = conf.data.astype(np.float64)
    labels, count = label_ordered(values >= threshold, cfg.connectivity)
    if count == 0:
        return []

    flat_labels = labels.ravel()
    foreground = np.flatnonzero(flat_labels)
    # Group voxel indices per label; stable sort keeps each group ascending
    grouped = foreground[np.argsort(flat_labels[foreground], kind="stable")]
    sizes = np.bincount(flat_labels[foreground], minlength=count + 1)[1:]
    groups = np.split(grouped, np.cumsum(sizes)[:-1])

    flat_values = values.ravel()
    candidates = [
        _make_candidate(flat_values, voxels, conf)
        for voxels in groups
        if voxels.size > cfg.min_voxels
    ]
    return rank_candidates(candidates, "peak")


def extract_static(conf: Volume, threshold: float, cfg: Optional[ExtractionConfig] = None) -> List[LesionCandidate]:
    """One candidate per island of voxels at or above a fixed threshold."""
    _require_confidence(conf)
    if not 0.0 < threshold < 1.0:
        raise ExtractionError(f"Static threshold must lie in (0, 1), got {threshold}")
    return _islands(conf, threshold, cfg or ExtractionConfig())


def extract_dynamic_fast(conf: Volume, cfg: Optional[ExtractionConfig] = None) -> List[LesionCandidate]:
    """Single threshold at rel_threshold of the volume maximum, then islands."""
    _require_confidence(conf)
    cfg = cfg or ExtractionConfig()
    global_max = float(conf.data.max())
    if global_max <= 0.0 or global_max < cfg.min_peak:
        return []
    return _islands(conf, cfg.rel_threshold * global_max, cfg)


def otsu_threshold(conf: Volume) -> float:
    """Otsu threshold over a 256-bin histogram on [0, 1]; ties go to the lower threshold."""
    flat = conf.flat.astype(np.float64)
    bins = np.minimum(np.floor(flat * OTSU_BINS), OTSU_BINS - 1).clip(0).astype(np.uint8)
    hist = cv2.calcHist([bins.reshape(-1, 1)], [0], None, [OTSU_BINS], [0, OTSU_BINS]).ravel().astype(np.float64)

    centers = (np.arange(OTSU_BINS) + 0.5) / OTSU_BINS
    total = hist.sum()
    # Split after bin k: class 0 = bins 0..k
    w0 = np.cumsum(hist)[:-1]
    w1 = total - w0
    m0 = np.cumsum(hist * centers)[:-1]
    m_total = float(np.dot(hist, centers))

    valid = (w0 > 0) & (w1 > 0)
    if not np.any(valid):
        raise ExtractionError("Otsu threshold undefined for a constant volume")

    between = np.full(OTSU_BINS - 1, -1.0)
    mu0 = m0[valid] / w0[valid]
    mu1 = (m_total - m0[valid]) / w1[valid]
    between[valid] = w0[valid] * w1[valid] * (mu0 - mu1) ** 2

    split = int(np.argmax(between))
    return (split + 1) / OTSU_BINS


def extract_otsu(conf: Volume, cfg: Optional[ExtractionConfig] = None) -> List[LesionCandidate]:
    _require_confidence(conf)
    return _islands(conf, otsu_threshold(conf), cfg or ExtractionConfig())


def extract_candidates(conf: Volume, cfg: Optional[ExtractionConfig] = None) -> List[LesionCandidate]:
    """Dispatch on cfg.method and apply the configured ranking"""
    cfg = cfg or ExtractionConfig()
    if cfg.method == "dynamic":
        candidates = extract_dynamic(conf, cfg)
    elif cfg.method == "dynamic-fast":
        candidates = extract_dynamic_fast(conf, cfg)
    elif cfg.method == "static":
        candidates = extract_static(conf, cfg.static_threshold, cfg)
    elif cfg.method == "otsu":
        candidates = extract_otsu(conf, cfg)
    else:
        raise ExtractionError(f"Unknown extraction method '{cfg.method}'")

    if cfg.ranking != "peak":
        candidates = rank_candidates(candidates, cfg.ranking)
    return candidates
