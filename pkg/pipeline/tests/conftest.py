import os

import hypothesis
import numpy as np
import pytest

from app.models.volume import Volume
from app.schemas.manifest import CaseRecord, write_manifest
from app.services.volume_io import write_volume

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

MARK_REPORT = (
    "Index lesion mark1: peripheral zone right apex. "
    "T2W/DWI/DCE score: 4/4/+. Minimal ADC value: 821 (normally at least 950). "
    "Risk category: intermediate/high-grade cancer (PI-RADS v2 category: 4)."
)
FINDING_REPORT = (
    "Finding nr. 1: peripheral zone right posterior mid-base prostate. "
    "Score T2W: 5, Score DCE: +, Score DWI: 5, minimal ADC value 665. "
    "Lesion best fits significant prostate cancer (PIRADS 5)."
)


@pytest.fixture
def mark_report() -> str:
    return MARK_REPORT


@pytest.fixture
def finding_report() -> str:
    return FINDING_REPORT


def blob_volume(dims=(12, 12, 6), spacing=(1.0, 1.0, 1.0), blobs=(), background=0.0) -> Volume:
    """Confidence volume with cubic plateaus: blobs = [((x0, y0, z0), (sx, sy, sz), value), ...]"""
    nx, ny, nz = dims
    data = np.full((nz, ny, nx), background, dtype=np.float32)
    for (x0, y0, z0), (sx, sy, sz), value in blobs:
        data[z0:z0 + sz, y0:y0 + sy, x0:x0 + sx] = value
    return Volume(data, spacing)


@pytest.fixture
def make_blobs():
    return blob_volume


@pytest.fixture
def case_dir(tmp_path):
    """Two-case manifest: a lesion case with report and a negative case."""
    lesion = blob_volume(dims=(16, 16, 4), blobs=[((2, 2, 0), (4, 4, 3), 0.9), ((10, 10, 0), (4, 4, 3), 0.5)])
    empty = blob_volume(dims=(16, 16, 4), blobs=[((6, 6, 0), (4, 4, 3), 0.3)])
    write_volume(lesion, tmp_path / "volumes" / "lesion")
    write_volume(empty, tmp_path / "volumes" / "negative")

    records = [
        CaseRecord(case_id="lesion", volume_paths=["volumes/lesion"], report=MARK_REPORT, true_n_sig=1),
        CaseRecord(
            case_id="negative",
            volume_paths=["volumes/negative"],
            report="Afwijking 1: transition zone. PI-RADS: 2.",
            true_n_sig=0,
        ),
    ]
    write_manifest(records, tmp_path / "manifest.jsonl")
    return tmp_path
