import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import PhantomSpecError
from ..models.phantom import PhantomSpec, PlantedLesion, SyntheticCase
from ..models.report import SIGNIFICANT_PIRADS, FindingScores, Report
from ..models.volume import LabelVolume, Volume
from ..schemas.manifest import CaseRecord, write_manifest
from ..schemas.scenario import ScenarioConfig
from ..utils.pool import CaseFailure, map_ordered
from .volume_io import write_volume

logger = logging.getLogger(__name__)

REPORT_VARIANTS = ("sectioned", "joint", "grouped")
BENIGN_FINDING = FindingScores(pirads=2, t2w=2, dwi=2, dce="-")
MAX_PLACEMENT_ATTEMPTS = 1000

ZONES = (
    "peripheral zone right apex",
    "peripheral zone left posterior mid-base prostate",
    "transition zone left anterior midgland",
    "peripheral zone right posterolateral base",
    "anterior fibromuscular stroma",
    "transition zone right apex",
)
RISK_CATEGORIES = {2: "low", 3: "intermediate", 4: "intermediate/high-grade cancer", 5: "high-grade cancer"}
BEST_FITS = {2: "benign hyperplasia", 3: "equivocal lesion", 4: "significant prostate cancer", 5: "significant prostate cancer"}

FindingLike = Union[FindingScores, Tuple[Optional[int], Optional[int], Optional[int], Optional[str]]]


def _grids(dims) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    nx, ny, nz = dims
    return (
        np.arange(nz, dtype=np.float64)[:, None, None],
        np.arange(ny, dtype=np.float64)[None, :, None],
        np.arange(nx, dtype=np.float64)[None, None, :],
    )


def _mahalanobis_sq(lesion: PlantedLesion, spacing_mm, grids) -> np.ndarray:
    zz, yy, xx = grids
    cx, cy, cz = lesion.center
    sx, sy, sz = spacing_mm
    gx, gy, gz = lesion.sigma_mm
    return ((xx - cx) * sx / gx) ** 2 + ((yy - cy) * sy / gy) ** 2 + ((zz - cz) * sz / gz) ** 2


def rician_noise(volume: Volume, sigma: float, seed: int = 0) -> Volume:
    """sqrt((v + sigma*phi1)^2 + (sigma*phi2)^2) with independent standard normal phi1, phi2.

    Confidence volumes are clipped back to 1 so the result stays a confidence map.
    """
    if sigma < 0:
        raise PhantomSpecError(f"Noise sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    values = volume.data.astype(np.float64)
    phi = rng.standard_normal((2,) + values.shape)
    noisy = np.sqrt((values + sigma * phi[0]) ** 2 + (sigma * phi[1]) ** 2)
    if volume.kind == "confidence":
        noisy = np.minimum(noisy, 1.0)
    return Volume(noisy, volume.spacing_mm, kind=volume.kind)


def generate_phantom(spec: PhantomSpec) -> Tuple[Volume, LabelVolume]:
    """Confidence map and 1-sigma ellipsoid ground truth for a phantom description."""
    grids = _grids(spec.dims)
    nx, ny, nz = spec.dims
    confidence = np.full((nz, ny, nx), spec.background_level, dtype=np.float64)
    for lesion in spec.lesions:
        confidence += lesion.amplitude * np.exp(-0.5 * _mahalanobis_sq(lesion, spec.spacing_mm, grids))
    volume = Volume(np.clip(confidence, 0.0, 1.0), spec.spacing_mm, kind="confidence")
    if spec.noise_sigma > 0:
        volume = rician_noise(volume, spec.noise_sigma, spec.seed)

    labels = np.zeros((nz, ny, nx), dtype=np.int32)
    for label, lesion in enumerate(spec.significant_lesions, start=1):
        inside = _mahalanobis_sq(lesion, spec.spacing_mm, grids) <= 1.0
        if np.any(labels[inside]):
            raise PhantomSpecError(f"Lesion at {lesion.center} overlaps an earlier lesion")
        labels[inside] = label

    return volume, LabelVolume(labels, spec.spacing_mm, connectivity=26)


def _as_finding(finding: FindingLike) -> FindingScores:
    if isinstance(finding, FindingScores):
        return finding
    pirads, t2w, dwi, dce = finding
    return FindingScores(pirads=pirads, t2w=t2w, dwi=dwi, dce=dce)


def _score_text(finding: FindingScores, style: int, rng: np.random.Generator) -> str:
    zone = ZONES[int(rng.integers(len(ZONES)))]
    adc = int(rng.integers(550, 1400))
    pirads = finding.pirads if finding.pirads is not None else 3
    if style == 0:
        parts = [f"{zone}."]
        if None not in (finding.t2w, finding.dwi, finding.dce):
            parts.append(f"T2W/DWI/DCE score: {finding.t2w}/{finding.dwi}/{finding.dce}.")
        else:
            parts.extend(_single_scores(finding, "T2W score: {}.", "DWI score: {}.", "DCE score: {}."))
        parts.append(f"Minimal ADC value: {adc} (normally at least 950).")
        if finding.pirads is not None:
            parts.append(f"Risk category: {RISK_CATEGORIES.get(pirads, 'low')} (PI-RADS v2 category: {finding.pirads}).")
        return " ".join(parts)
    if style == 1:
        parts = [f"{zone}."]
        parts.extend(_single_scores(finding, "Score T2W: {},", "Score DWI: {},", "Score DCE: {},"))
        parts.append(f"minimal ADC value {adc}.")
        if finding.pirads is not None:
            parts.append(f"Lesion best fits {BEST_FITS.get(pirads, 'equivocal lesion')} (PIRADS {finding.pirads}).")
        return " ".join(parts)
    parts = [f"{zone}."]
    parts.extend(_single_scores(finding, "T2W score: {},", "DWI score: {},", "DCE score: {}."))
    if finding.pirads is not None:
        parts.append(f"PI-RADS: {finding.pirads}.")
    return " ".join(parts)


def _single_scores(finding: FindingScores, t2w: str, dwi: str, dce: str) -> List[str]:
    parts = []
    if finding.t2w is not None:
        parts.append(t2w.format(finding.t2w))
    if finding.dwi is not None:
        parts.append(dwi.format(finding.dwi))
    if finding.dce is not None:
        parts.append(dce.format(finding.dce))
    return parts


HEADERS = ("Index lesion mark{}:", "Finding nr. {}:", "Afwijking {}:")


def _sectioned(groups: List[List[FindingScores]], rng: np.random.Generator) -> str:
    sections = []
    identifier = 1
    for group in groups:
        numbers = "+".join(str(identifier + k) for k in range(len(group)))
        identifier += len(group)
        if len(group) > 1:
            style = 2
            header = f"Afwijking {numbers}:"
        else:
            style = int(rng.integers(len(HEADERS)))
            header = HEADERS[style].format(numbers)
        sections.append(f"{header} {_score_text(group[0], style, rng)}")
    return "\n".join(sections)


def _joint(findings: List[FindingScores], rng: np.random.Generator) -> str:
    sentences = []
    for finding in findings:
        zone = ZONES[int(rng.integers(len(ZONES)))]
        sentences.append(
            f"In the {zone} T2W/DWI/DCE score: {finding.t2w}/{finding.dwi}/{finding.dce}, PI-RADS {finding.pirads}."
        )
    return " ".join(sentences)


def _grouping(findings: List[FindingScores]) -> Optional[Tuple[int, int]]:
    """First pair with identical scores, else first pair with equal significance."""
    for same in (lambda a, b: a == b, lambda a, b: a.is_significant == b.is_significant):
        for i in range(len(findings)):
            for j in range(i + 1, len(findings)):
                if same(findings[i], findings[j]):
                    return i, j
    return None


def generate_report(
    findings: Sequence[FindingLike],
    variant: str = "sectioned",
    seed: int = 0,
    case_id: str = "synthetic",
) -> Report:
    """Report text in the section/score grammar the parser reads."""
    if variant not in REPORT_VARIANTS:
        raise PhantomSpecError(f"Unknown report variant '{variant}'")
    rng = np.random.default_rng(seed)
    planted = [_as_finding(f) for f in findings] or [BENIGN_FINDING]

    if variant == "joint" and any(None in (f.pirads, f.t2w, f.dwi, f.dce) for f in planted):
        logger.debug("Case %s: joint variant needs complete scores, writing sections", case_id)
        variant = "sectioned"

    if variant == "joint":
        body = _joint(planted, rng)
    else:
        groups = [[f] for f in planted]
        pair = _grouping(planted) if variant == "grouped" else None
        if pair is not None:
            i, j = pair
            groups = [[planted[k]] for k in range(len(planted)) if k not in pair]
            groups.insert(i, [planted[i], planted[j]])
        body = _sectioned(groups, rng)

    return Report(case_id, "MRI prostate, biparametric protocol.\n" + body)


def _uniform(rng: np.random.Generator, bounds: Tuple[float, float]) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def _place(
    rng: np.random.Generator,
    scenario: ScenarioConfig,
    sigma_mm: Tuple[float, float, float],
    placed: List[PlantedLesion],
) -> Optional[Tuple[int, int, int]]:
    margins = [min(int(np.ceil(2 * s / sp)), d // 2) for s, sp, d in zip(sigma_mm, scenario.spacing_mm, scenario.dims)]
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        center = tuple(int(rng.integers(m, d - m)) if d - m > m else d // 2 for m, d in zip(margins, scenario.dims))
        position = np.asarray(center) * np.asarray(scenario.spacing_mm)
        clear = True
        for other in placed:
            distance = np.linalg.norm(position - np.asarray(other.center) * np.asarray(scenario.spacing_mm))
            if distance < scenario.min_separation_sigma * max(max(sigma_mm), max(other.sigma_mm)):
                clear = False
                break
        if clear:
            return center
    return None


def _finding_for(lesion: PlantedLesion, significant: bool, rng: np.random.Generator) -> FindingScores:
    if significant:
        pirads = 5 if lesion.amplitude >= 0.85 else SIGNIFICANT_PIRADS
        return FindingScores(pirads=pirads, t2w=pirads, dwi=pirads, dce="+")
    pirads = int(rng.integers(2, SIGNIFICANT_PIRADS))
    return FindingScores(pirads=pirads, t2w=pirads, dwi=int(rng.integers(2, 4)), dce="-")


def generate_case(case_id: str, scenario: ScenarioConfig, seed: int) -> SyntheticCase:
    """One synthetic case: planted lesions, false-positive blobs, ensemble members and report."""
    rng = np.random.default_rng(seed)
    n_lesions = int(rng.integers(scenario.min_lesions, scenario.max_lesions + 1))
    n_false_positives = int(rng.integers(scenario.min_false_positives, scenario.max_false_positives + 1))

    planted: List[PlantedLesion] = []
    findings: List[FindingScores] = []
    for position in range(n_lesions + n_false_positives):
        reported = position < n_lesions
        significant = reported and rng.uniform() >= scenario.insignificant_fraction
        sigma = tuple(_uniform(rng, scenario.sigma_mm) for _ in range(3))
        amplitude = _uniform(rng, scenario.significant_amplitude if significant else scenario.false_positive_amplitude)
        center = _place(rng, scenario, sigma, planted)
        if center is None:
            logger.debug("Case %s: no room for lesion %d, planting fewer", case_id, position + 1)
            continue
        lesion = PlantedLesion(center=center, sigma_mm=sigma, amplitude=amplitude)
        planted.append(lesion)
        if reported:
            findings.append(_finding_for(lesion, significant, rng))

    spec = PhantomSpec(
        dims=scenario.dims,
        spacing_mm=scenario.spacing_mm,
        lesions=tuple(planted),
        background_level=scenario.background_level,
        seed=seed,
        noise_sigma=scenario.noise_sigma,
        significance_cut=scenario.significance_cut,
    )
    confidence, gt = generate_phantom(spec)

    members = [confidence]
    if scenario.ensemble_members > 1:
        member_seeds = np.random.SeedSequence(seed).generate_state(scenario.ensemble_members)
        members = [rician_noise(confidence, scenario.member_noise_sigma, int(s)) for s in member_seeds]

    variant = scenario.variants[int(rng.integers(len(scenario.variants)))]
    report = generate_report(findings, variant, seed=int(rng.integers(2**31)), case_id=case_id)
    return SyntheticCase(
        case_id=case_id,
        members=members,
        gt=gt,
        report=report,
        true_n_sig=gt.num_labels,
        findings=findings,
        variant=variant,
    )


def case_seeds(scenario: ScenarioConfig) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(scenario.seed).generate_state(scenario.cases)]


def materialize_scenario(scenario: ScenarioConfig, out_dir: Union[str, Path], jobs: int = 1) -> Path:
    """Write volumes, ground truth, reports and manifest.jsonl for a scenario; returns the manifest path."""
    out_dir = Path(out_dir)
    for sub in ("volumes", "gt", "reports"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    width = max(3, len(str(scenario.cases)))
    jobs_list = [(f"{scenario.case_prefix}{index:0{width}d}", seed) for index, seed in enumerate(case_seeds(scenario))]

    def write_case(item: Tuple[str, int]) -> CaseRecord:
        case_id, seed = item
        case = generate_case(case_id, scenario, seed)
        volume_paths = []
        for member, volume in enumerate(case.members):
            relative = f"volumes/{case_id}_m{member}"
            write_volume(volume, out_dir / relative)
            volume_paths.append(relative)
        write_volume(case.gt, out_dir / f"gt/{case_id}_gt")
        (out_dir / f"reports/{case_id}.txt").write_text(case.report.body, encoding="utf-8")
        return CaseRecord(
            case_id=case_id,
            volume_paths=volume_paths,
            report_path=f"reports/{case_id}.txt",
            gt_path=f"gt/{case_id}_gt",
            true_n_sig=case.true_n_sig,
        )

    results = map_ordered(write_case, jobs_list, jobs=jobs, key=lambda item: item[0])
    failures = [r for r in results if isinstance(r, CaseFailure)]
    if failures:
        raise PhantomSpecError(f"{len(failures)} synthetic cases failed, first: {failures[0].detail}")

    with (out_dir / "scenario.json").open("w", encoding="utf-8") as handle:
        json.dump(scenario.model_dump(mode="json"), handle, indent=2, sort_keys=True)

    manifest = out_dir / "manifest.jsonl"
    write_manifest(results, manifest)
    logger.info("Wrote %d synthetic cases to %s", len(results), out_dir)
    return manifest
