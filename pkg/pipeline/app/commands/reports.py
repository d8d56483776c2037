import argparse
import logging
from pathlib import Path

from ..core.errors import ManifestError
from ..models.report import Report
from ..schemas.manifest import CaseRecord, load_manifest
from ..services.report_parser import ReportParser, confusion_table, evaluate_counts
from ..utils.pool import CaseFailure, map_ordered
from ..utils.serialization import write_json, write_jsonl
from .common import add_common_flags, build_context, finish, split_failures

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("parse-reports", help="extract PI-RADS findings and n_sig from reports")
    parser.add_argument("manifest", type=Path, help="case manifest (JSON Lines)")
    add_common_flags(parser)
    parser.set_defaults(handler=run_parse_reports)


def run_parse_reports(args: argparse.Namespace) -> int:
    context = build_context(args)
    records = load_manifest(args.manifest)
    parser = ReportParser(context.config.language)

    def parse(record: CaseRecord) -> dict:
        text = record.report_text()
        if text is None:
            raise ManifestError("Case has no report text", case_id=record.case_id)
        if not text.strip():
            row = {"status": "empty", "n_sig": 0, "findings": []}
        else:
            row = parser.extract(Report(record.case_id, text)).to_dict()
        row["case_id"] = record.case_id
        if record.true_n_sig is not None:
            row["true_n_sig"] = record.true_n_sig
        return row

    results = map_ordered(parse, records, jobs=context.config.jobs)
    failures = split_failures(results)
    write_jsonl([r.to_dict() if isinstance(r, CaseFailure) else r for r in results], context.out_dir / "reports.jsonl")

    parsed = [r for r in results if not isinstance(r, CaseFailure)]
    if parsed and all("true_n_sig" in row for row in parsed):
        matrix = evaluate_counts([row["n_sig"] for row in parsed], [row["true_n_sig"] for row in parsed])
        write_json(matrix.to_dict(), context.out_dir / "confusion.json")
        (context.out_dir / "confusion.txt").write_text(confusion_table(matrix) + "\n", encoding="utf-8")
        logger.info("Count accuracy %.4f over %d reports", matrix.accuracy, matrix.total)

    return finish(failures, len(records))
