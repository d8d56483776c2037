import json
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.errors import ManifestError


class CaseRecord(BaseModel):
    """One manifest line: ensemble volumes, report, optional ground truth"""

    model_config = ConfigDict(extra="forbid")

    case_id: str = Field(..., min_length=1)
    volume_paths: List[str] = Field(..., min_length=1)
    report: Optional[str] = None
    report_path: Optional[str] = None
    gt_path: Optional[str] = None
    n_sig_override: Optional[int] = Field(None, ge=0)
    true_n_sig: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _needs_report_or_count(self):
        if self.report is not None and self.report_path is not None:
            raise ValueError("give either 'report' or 'report_path', not both")
        if self.report is None and self.report_path is None and self.n_sig_override is None:
            raise ValueError("a case needs 'report', 'report_path' or 'n_sig_override'")
        return self

    def resolved(self, base_dir: Path) -> "CaseRecord":
        """Copy with relative paths anchored at the manifest directory."""

        def anchor(path: Optional[str]) -> Optional[str]:
            if path is None:
                return None
            candidate = Path(path)
            return str(candidate if candidate.is_absolute() else base_dir / candidate)

        return self.model_copy(update={
            "volume_paths": [anchor(p) for p in self.volume_paths],
            "report_path": anchor(self.report_path),
            "gt_path": anchor(self.gt_path),
        })

    def report_text(self) -> Optional[str]:
        if self.report is not None:
            return self.report
        if self.report_path is None:
            return None
        try:
            return Path(self.report_path).read_text(encoding="utf-8")
        except OSError as e:
            raise ManifestError(f"Cannot read report {self.report_path}: {e}", case_id=self.case_id) from e


def load_manifest(path: Path) -> List[CaseRecord]:
    """Parse a JSON-Lines manifest; blank lines are skipped."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ManifestError(f"Cannot read manifest {path}: {e}") from e

    records: List[CaseRecord] = []
    seen = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = CaseRecord.model_validate(json.loads(line))
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}:{number}: invalid JSON ({e})") from e
        except ValidationError as e:
            raise ManifestError(f"{path}:{number}: invalid case record ({e})") from e
        if record.case_id in seen:
            raise ManifestError(f"{path}:{number}: duplicate case_id '{record.case_id}'")
        seen.add(record.case_id)
        records.append(record.resolved(path.parent))

    if not records:
        raise ManifestError(f"Manifest {path} holds no cases")
    return records


def write_manifest(records: List[CaseRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.model_dump(exclude_none=True), sort_keys=True) + "\n")
