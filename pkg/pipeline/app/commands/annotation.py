import argparse
import json
import logging
from pathlib import Path
from typing import Dict, Optional

from ..core.errors import ConfigurationError, ManifestError
from ..schemas.manifest import CaseRecord, load_manifest
from ..services.annotation import AnnotationPipeline
from ..services.volume_io import write_volume
from ..utils.pool import CaseFailure, map_ordered
from ..utils.serialization import candidate_from_dict, candidate_to_dict, read_jsonl, write_jsonl
from .common import add_common_flags, build_context, finish, split_failures

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    extract = subparsers.add_parser("extract", help="lesion candidates per case")
    extract.add_argument("manifest", type=Path, help="case manifest (JSON Lines)")
    add_common_flags(extract)
    extract.set_defaults(handler=run_extract)

    annotate = subparsers.add_parser("annotate", help="report-guided automatic annotations")
    annotate.add_argument("manifest", type=Path, help="case manifest (JSON Lines)")
    annotate.add_argument(
        "--candidates", type=Path, help="candidates.jsonl from an earlier extract run; volumes are not read",
    )
    add_common_flags(annotate)
    annotate.set_defaults(handler=run_annotate)


def _rows(results):
    return [r.to_dict() if isinstance(r, CaseFailure) else r for r in results]


def _extracted_cases(path: Path) -> Dict[str, dict]:
    try:
        rows = read_jsonl(path)
    except OSError as e:
        raise ConfigurationError(f"Cannot read candidates file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Candidates file {path} is not valid JSON Lines: {e}") from e
    return {row["case_id"]: row for row in rows if row.get("status") == "ok"}


def run_extract(args: argparse.Namespace) -> int:
    context = build_context(args)
    records = load_manifest(args.manifest)
    pipeline = AnnotationPipeline(context.config.extraction, context.config.language)

    def extract(record: CaseRecord) -> dict:
        confidence = pipeline.load_confidence(record)
        candidates = pipeline.candidates(record, confidence)
        return {
            "case_id": record.case_id,
            "status": "ok",
            "method": context.config.extraction.method,
            "dims": list(confidence.dims),
            "spacing_mm": list(confidence.spacing_mm),
            "candidates": [candidate_to_dict(c, rank) for rank, c in enumerate(candidates, start=1)],
        }

    results = map_ordered(extract, records, jobs=context.config.jobs)
    write_jsonl(_rows(results), context.out_dir / "candidates.jsonl")
    return finish(split_failures(results), len(records))


def run_annotate(args: argparse.Namespace) -> int:
    context = build_context(args)
    records = load_manifest(args.manifest)
    pipeline = AnnotationPipeline(context.config.extraction, context.config.language)
    extracted: Optional[Dict[str, dict]] = _extracted_cases(args.candidates) if args.candidates else None
    mask_dir = context.out_dir / "masks"

    def annotate(record: CaseRecord) -> dict:
        if extracted is None:
            outcome = pipeline.annotate_case(record)
        else:
            saved = extracted.get(record.case_id)
            if saved is None:
                raise ManifestError(f"No extracted candidates for case {record.case_id}", case_id=record.case_id)
            dims = tuple(saved["dims"])
            candidates = [candidate_from_dict(c, dims) for c in saved["candidates"]]
            _, outcome = pipeline.annotate_candidates(record, candidates, dims, tuple(saved["spacing_mm"]))

        row = outcome.to_dict()
        if outcome.mask is not None:
            relative = f"masks/{record.case_id}_mask"
            write_volume(outcome.mask, context.out_dir / relative)
            row["mask_path"] = relative
        return row

    mask_dir.mkdir(parents=True, exist_ok=True)
    results = map_ordered(annotate, records, jobs=context.config.jobs)
    rows = _rows(results)
    write_jsonl(rows, context.out_dir / "annotations.jsonl")

    counts = {}
    for row in rows:
        counts[row["status"]] = counts.get(row["status"], 0) + 1
    logger.info("Annotation outcomes: %s", ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return finish(split_failures(results), len(records))
