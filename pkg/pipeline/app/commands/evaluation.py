import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List

from ..core.errors import ManifestError, MetricError
from ..models.evaluation import FrocCurve
from ..models.lesion import STATUS_EXCLUDED, AnnotationOutcome, LesionCandidate
from ..models.volume import LabelVolume
from ..schemas.config import EvaluationConfig
from ..schemas.manifest import CaseRecord, load_manifest
from ..services.annotation import AnnotationPipeline, mask_candidates
from ..services.metrics import (
    auroc,
    case_score,
    dsc_report,
    froc,
    localisation_summary,
    operating_point,
    pauc,
    roc,
)
from ..services.volume_io import read_label_volume
from ..utils.pool import CaseFailure, map_ordered
from ..utils.serialization import write_csv, write_json, write_jsonl
from .common import add_common_flags, build_context, finish, split_failures

logger = logging.getLogger(__name__)


@dataclass
class CaseEvaluation:
    case_id: str
    candidates: List[LesionCandidate]
    outcome: AnnotationOutcome
    gt: LabelVolume

    @property
    def masked(self) -> List[LesionCandidate]:
        return mask_candidates(self.candidates, self.outcome.n_sig)


def register(subparsers) -> None:
    localisation = subparsers.add_parser("eval-localisation", help="FROC with and without report masking")
    localisation.add_argument("manifest", type=Path, help="case manifest with gt_path per case")
    add_common_flags(localisation)
    localisation.set_defaults(handler=run_eval_localisation)

    detection = subparsers.add_parser("eval-detection", help="AUROC, pAUC, operating points and DSC")
    detection.add_argument("manifest", type=Path, help="case manifest with gt_path per case")
    add_common_flags(detection)
    detection.set_defaults(handler=run_eval_detection)


def _evaluate_cases(args: argparse.Namespace):
    context = build_context(args)
    records = load_manifest(args.manifest)
    pipeline = AnnotationPipeline(context.config.extraction, context.config.language)

    def evaluate(record: CaseRecord) -> CaseEvaluation:
        if record.gt_path is None:
            raise ManifestError("Case has no gt_path", case_id=record.case_id)
        gt = read_label_volume(record.gt_path)
        candidates, outcome = pipeline.run_case(record)
        return CaseEvaluation(record.case_id, candidates, outcome, gt)

    results = map_ordered(evaluate, records, jobs=context.config.jobs)
    evaluations = [r for r in results if isinstance(r, CaseEvaluation)]
    if not evaluations:
        raise MetricError("No case could be evaluated")
    return context, records, results, evaluations


def _froc_summary(curve: FrocCurve, evaluation: EvaluationConfig) -> dict:
    if not curve.points:
        # No candidate survived anywhere: sensitivity is 0 at every FP level
        logger.warning("FROC curve without points; reporting zero pAUC and sensitivity")
        area, sensitivity = 0.0, 0.0
    else:
        area = pauc(curve, evaluation.pauc_lo, evaluation.pauc_hi)
        sensitivity = operating_point(curve, "sens_at_fp", evaluation.sens_at_fp)
    return {
        "pauc": area,
        "sensitivity_at_fp": sensitivity,
        "fp_level": evaluation.sens_at_fp,
        "n_points": len(curve.points),
        "n_lesions": curve.n_lesions,
        "n_cases": curve.n_cases,
    }


def _failure_rows(results) -> List[dict]:
    return [r.to_dict() for r in results if isinstance(r, CaseFailure)]


def run_eval_localisation(args: argparse.Namespace) -> int:
    context, records, results, evaluations = _evaluate_cases(args)
    cfg = context.config.evaluation
    ranking = context.config.extraction.ranking

    unfiltered = froc([(e.candidates, e.gt) for e in evaluations], cfg.hit_threshold, cfg.criterion, ranking)
    masked = froc([(e.masked, e.gt) for e in evaluations], cfg.hit_threshold, cfg.criterion, ranking)

    annotated = [e for e in evaluations if e.outcome.status != STATUS_EXCLUDED]
    summary = localisation_summary(
        [e.outcome.kept for e in annotated],
        [e.gt for e in annotated],
        cfg.hit_threshold,
        cfg.criterion,
        n_excluded=len(evaluations) - len(annotated),
    )

    fields = ["threshold", "fp_per_case", "sensitivity"]
    write_csv(unfiltered.to_rows(), context.out_dir / "froc_unfiltered.csv", fields)
    write_csv(masked.to_rows(), context.out_dir / "froc_masked.csv", fields)
    write_json({
        "unfiltered": _froc_summary(unfiltered, cfg),
        "masked": _froc_summary(masked, cfg),
        "annotations": summary.to_dict(),
        "failures": _failure_rows(results),
    }, context.out_dir / "localisation.json")

    logger.info(
        "Sensitivity %.3f at %.3f FP/case for annotations (%d excluded)",
        summary.sensitivity, summary.fp_per_case, summary.n_excluded,
    )
    return finish(split_failures(results), len(records))


def run_eval_detection(args: argparse.Namespace) -> int:
    context, records, results, evaluations = _evaluate_cases(args)
    cfg = context.config.evaluation
    ranking = context.config.extraction.ranking

    scores = [case_score(e.candidates) for e in evaluations]
    labels = [int(e.gt.num_labels > 0) for e in evaluations]
    write_jsonl(
        [{"case_id": e.case_id, "score": s, "label": y} for e, s, y in zip(evaluations, scores, labels)],
        context.out_dir / "case_scores.jsonl",
    )

    detection: dict = {"failures": _failure_rows(results)}
    try:
        curve = roc(scores, labels)
        detection["auroc"] = auroc(scores, labels)
        write_csv(curve.to_rows(), context.out_dir / "roc.csv", ["threshold", "fpr", "tpr"])
        if cfg.spec_at_sens is not None:
            detection["specificity_at_sensitivity"] = operating_point(curve, "spec_at_sens", cfg.spec_at_sens)
    except MetricError as e:
        logger.warning("Case-level ROC skipped: %s", e.detail)
        detection["auroc"] = None

    lesion_curve = froc([(e.candidates, e.gt) for e in evaluations], cfg.hit_threshold, cfg.criterion, ranking)
    detection["froc"] = _froc_summary(lesion_curve, cfg)
    write_csv(lesion_curve.to_rows(), context.out_dir / "froc.csv", ["threshold", "fp_per_case", "sensitivity"])

    outcomes = [e.outcome for e in evaluations]
    gts = [e.gt for e in evaluations]
    for include_missed in (False, True):
        report = dsc_report(outcomes, gts, include_missed, cfg.hit_threshold, cfg.criterion)
        key = "dsc_with_missed" if include_missed else "dsc"
        detection[key] = {"mean": report.mean, "std": report.std, "n_lesions": len(report.per_lesion)}
        if include_missed:
            write_csv(
                [d.to_dict() for d in report.per_lesion],
                context.out_dir / "dsc.csv",
                ["case_id", "gt_label", "dsc", "volume_cm3", "matched"],
            )

    write_json(detection, context.out_dir / "detection.json")
    return finish(split_failures(results), len(records))
