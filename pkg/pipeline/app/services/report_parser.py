import logging
import re
import unicodedata
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..core.errors import AnnotationToolError, NoScoresFound, ReportFormatError
from ..models.report import (
    COUNT_BUCKETS,
    STATUS_EMPTY,
    STATUS_SECTIONED,
    STATUS_STRICT,
    ConfusionMatrix,
    FindingScores,
    LesionSection,
    Report,
    ReportExtraction,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LanguageProfile:
    name: str
    keywords: Tuple[str, ...]
    indicators: Tuple[str, ...]


LANGUAGE_PROFILES: Dict[str, LanguageProfile] = {
    "dutch": LanguageProfile(
        name="dutch",
        keywords=("afwijking", "laesie", "markering", "regio"),
        indicators=(r"nr\.?", "mark", "nummer"),
    ),
    "english": LanguageProfile(
        name="english",
        keywords=("index lesion", "lesion", "finding"),
        indicators=(r"nr\.?", r"no\.?", "mark", "number"),
    ),
}
LANGUAGE_PROFILES["bilingual"] = LanguageProfile(
    name="bilingual",
    keywords=LANGUAGE_PROFILES["dutch"].keywords + LANGUAGE_PROFILES["english"].keywords,
    indicators=tuple(dict.fromkeys(LANGUAGE_PROFILES["dutch"].indicators + LANGUAGE_PROFILES["english"].indicators)),
)

# Score patterns run on normalised text with re.IGNORECASE
PIRADS_PATTERN = re.compile(
    r"\bpi-?rads(?:\s*v2(?:\.1)?)?(?:\s*category)?\s*:?\s*(?P<score>[1-5])(?!\d)",
    re.IGNORECASE,
)
JOINT_PATTERN = re.compile(
    r"\bt2w\s*/\s*dwi\s*/\s*dce(?:\s*score)?\s*:?\s*"
    r"(?P<t2w>[1-5])\s*/\s*(?P<dwi>[1-5])\s*/\s*(?P<dce>[+-])",
    re.IGNORECASE,
)
SINGLE_PATTERNS = {
    "t2w": re.compile(r"\b(?:score\s+)?t2w(?:\s+score)?\s*:?\s*(?P<score>[1-5])(?![\d/])", re.IGNORECASE),
    "dwi": re.compile(r"\b(?:score\s+)?dwi(?:\s+score)?\s*:?\s*(?P<score>[1-5])(?![\d/])", re.IGNORECASE),
    "dce": re.compile(r"\b(?:score\s+)?dce(?:\s+score)?\s*:?\s*(?P<score>[+-])", re.IGNORECASE),
}

_DASHES = {"−": "-", "–": "-", "‐": "-", "‑": "-", "＋": "+"}


def normalize_text(text: str) -> str:
    """Strip diacritics, unify minus signs and collapse whitespace"""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    for dash, replacement in _DASHES.items():
        stripped = stripped.replace(dash, replacement)
    return re.sub(r"\s+", " ", stripped).strip()


def _keyword_alternation(keywords: Sequence[str]) -> str:
    # Longest first so 'index lesion' wins over 'lesion'
    ordered = sorted(keywords, key=len, reverse=True)
    return "|".join(r"\s+".join(re.escape(part) for part in kw.split()) for kw in ordered)


class ReportParser:
    """Two-step rule-based score extraction: per-lesion sections, then strict joint matching"""

    def __init__(self, language: str = "bilingual"):
        if language not in LANGUAGE_PROFILES:
            raise ReportFormatError(f"Unknown language profile '{language}'")
        self.profile = LANGUAGE_PROFILES[language]
        self.header_pattern = re.compile(
            r"\b(?P<keyword>(?:index\s+)?(?:" + _keyword_alternation(self.profile.keywords) + r"))"
            r"\s*(?:(?:" + "|".join(self.profile.indicators) + r")\s*)?"
            r"(?P<numbers>\d+(?:\s*\+\s*\d+)*)(?![.,]?\d)(?!\s*(?:mm|cm|ml|cc)\b)\s*:?",
            re.IGNORECASE,
        )

    def split_sections(self, report: Report) -> List[LesionSection]:
        """Split a report into one section per lesion header."""
        body = normalize_text(report.body)
        headers = []
        for match in self.header_pattern.finditer(body):
            identifiers = [int(n) for n in re.split(r"\s*\+\s*", match.group("numbers"))]
            if any(i < 1 for i in identifiers):
                logger.debug("Ignoring header %r with a zero identifier", match.group(0))
                continue
            headers.append((match, identifiers))

        sections = []
        for position, (match, identifiers) in enumerate(headers):
            end = headers[position + 1][0].start() if position + 1 < len(headers) else len(body)
            sections.append(LesionSection(
                identifiers=identifiers,
                text=body[match.end():end].strip(),
                header=match.group(0),
            ))
        return sections

    def extract_scores_section(self, section: LesionSection) -> FindingScores:
        """Read PI-RADS, T2W, DWI and DCE from one section."""
        text = normalize_text(section.text)
        scores: Dict[str, Optional[object]] = {"t2w": None, "dwi": None, "dce": None}

        joint = JOINT_PATTERN.search(text)
        if joint:
            scores["t2w"] = int(joint.group("t2w"))
            scores["dwi"] = int(joint.group("dwi"))
            scores["dce"] = joint.group("dce")

        for name, pattern in SINGLE_PATTERNS.items():
            if scores[name] is not None:
                continue
            match = pattern.search(text)
            if match:
                value = match.group("score")
                scores[name] = value if name == "dce" else int(value)

        pirads = PIRADS_PATTERN.search(text)
        pirads_score = int(pirads.group("score")) if pirads else None

        if pirads_score is None and all(v is None for v in scores.values()):
            raise NoScoresFound(f"No scores in section {section.header or section.identifiers}")

        return FindingScores(
            pirads=pirads_score,
            t2w=scores["t2w"],
            dwi=scores["dwi"],
            dce=scores["dce"],
            multiplicity=len(section.identifiers),
        )

    def extract_strict(self, report: Report) -> List[FindingScores]:
        """Full-report fallback: only joint T2W/DWI/DCE matches, PI-RADS paired in document order."""
        body = normalize_text(report.body)
        joints = list(JOINT_PATTERN.finditer(body))
        if not joints:
            return []

        pirads = [int(m.group("score")) for m in PIRADS_PATTERN.finditer(body)]
        findings = []
        for position, joint in enumerate(joints):
            findings.append(FindingScores(
                pirads=pirads[position] if position < len(pirads) else None,
                t2w=int(joint.group("t2w")),
                dwi=int(joint.group("dwi")),
                dce=joint.group("dce"),
            ))
        return findings

    def extract(self, report: Report) -> ReportExtraction:
        """Sectioned extraction first, strict fallback second; never raises."""
        try:
            findings = []
            for section in self.split_sections(report):
                try:
                    findings.append(self.extract_scores_section(section))
                except NoScoresFound:
                    logger.debug("Case %s: score-less section %s", report.case_id, section.header)
            if findings:
                return ReportExtraction(findings, STATUS_SECTIONED)

            findings = self.extract_strict(report)
            if findings:
                return ReportExtraction(findings, STATUS_STRICT)
        except AnnotationToolError as e:
            logger.warning("Case %s: extraction failed (%s), treating as empty", report.case_id, e.detail)

        return ReportExtraction([], STATUS_EMPTY)


def split_sections(report: Report, language: str = "bilingual") -> List[LesionSection]:
    return ReportParser(language).split_sections(report)


def extract_scores_section(section: LesionSection) -> FindingScores:
    return ReportParser().extract_scores_section(section)


def extract_strict(report: Report) -> List[FindingScores]:
    return ReportParser().extract_strict(report)


def extract(report: Report, language: str = "bilingual") -> ReportExtraction:
    return ReportParser(language).extract(report)


def _bucket(count: int) -> int:
    if count < 0:
        raise ReportFormatError(f"Lesion counts must be non-negative, got {count}")
    return min(int(count), COUNT_BUCKETS - 1)


def evaluate_counts(predicted: Sequence[int], truth: Sequence[int]) -> ConfusionMatrix:
    """Confusion matrix of predicted vs true n_sig, counts clipped to '5+'."""
    if len(predicted) != len(truth):
        raise ReportFormatError(f"Got {len(predicted)} predictions for {len(truth)} truth counts")
    if not predicted:
        raise ReportFormatError("Cannot evaluate an empty list of counts")

    counts = [[0] * COUNT_BUCKETS for _ in range(COUNT_BUCKETS)]
    for p, t in zip(predicted, truth):
        counts[_bucket(t)][_bucket(p)] += 1
    return ConfusionMatrix(counts)


def confusion_table(matrix: ConfusionMatrix) -> str:
    """Aligned text rendering: rows = truth, columns = prediction."""
    labels = matrix.to_dict()["buckets"]
    width = max(4, max(len(str(c)) for row in matrix.counts for c in row) + 1)
    lines = ["truth\\pred" + "".join(label.rjust(width) for label in labels)]
    for label, row in zip(labels, matrix.counts):
        lines.append(label.rjust(10) + "".join(str(c).rjust(width) for c in row))
    lines.append(f"accuracy {matrix.correct}/{matrix.total} = {matrix.accuracy:.4f}")
    return "\n".join(lines)
