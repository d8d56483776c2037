#!/usr/bin/env python3
"""
Write a small synthetic cohort for testing and demonstration.

    python init_sample_data.py [out_dir]
"""

import sys
from pathlib import Path

from app.core.config import configure_logging
from app.schemas.manifest import load_manifest
from app.schemas.scenario import ScenarioConfig
from app.services.annotation import AnnotationPipeline, mask_candidates
from app.services.metrics import froc, pauc
from app.services.synthetic import materialize_scenario
from app.services.volume_io import read_label_volume


def create_sample_scenario() -> ScenarioConfig:
    """Twelve cases, two ensemble members, every report variant"""
    return ScenarioConfig(
        cases=12,
        seed=2024,
        case_prefix="demo",
        dims=(48, 48, 12),
        spacing_mm=(0.5, 0.5, 3.0),
        min_lesions=0,
        max_lesions=3,
        max_false_positives=2,
        noise_sigma=0.01,
        ensemble_members=2,
    )


def summarize(manifest: Path):
    """Annotate the cohort and print masked vs unfiltered pAUC"""
    pipeline = AnnotationPipeline()
    unfiltered, masked = [], []
    statuses = {}
    for record in load_manifest(manifest):
        candidates, outcome = pipeline.run_case(record)
        gt = read_label_volume(record.gt_path)
        unfiltered.append((candidates, gt))
        masked.append((mask_candidates(candidates, outcome.n_sig), gt))
        statuses[outcome.status] = statuses.get(outcome.status, 0) + 1

    print(f"- Annotation outcomes: {statuses}")
    if sum(gt.num_labels for _, gt in unfiltered) == 0:
        print("- No significant lesions planted; skipping FROC")
        return
    for name, cases in (("unfiltered", unfiltered), ("report-masked", masked)):
        curve = froc(cases)
        print(f"- pAUC {name}: {pauc(curve) if curve.points else 0.0:.3f}")


def init_sample_data(out_dir: Path):
    if (out_dir / "manifest.jsonl").exists():
        print(f"Sample data already exists in {out_dir}. Skipping generation.")
        return

    print("Creating sample cohort...")
    scenario = create_sample_scenario()
    manifest = materialize_scenario(scenario, out_dir, jobs=2)

    print("Successfully created sample data:")
    print(f"- Manifest: {manifest}")
    print(f"- Cases: {scenario.cases}")
    summarize(manifest)


if __name__ == "__main__":
    configure_logging()
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("sample_data")
    print(f"Initializing synthetic cohort in {target}...")
    init_sample_data(target)
