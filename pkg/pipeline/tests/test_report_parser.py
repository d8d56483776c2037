import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.core.errors import NoScoresFound, ReportFormatError
from app.models.report import LesionSection, Report
from app.services.report_parser import (
    ReportParser,
    confusion_table,
    evaluate_counts,
    extract,
    extract_scores_section,
    extract_strict,
    split_sections,
)


def _report(body: str) -> Report:
    return Report("case", body)


def test_mark_report_section(mark_report):
    sections = split_sections(_report(mark_report))
    assert [s.identifiers for s in sections] == [[1]]
    scores = extract_scores_section(sections[0])
    assert (scores.pirads, scores.t2w, scores.dwi, scores.dce) == (4, 4, 4, "+")


def test_finding_report_section(finding_report):
    sections = split_sections(_report(finding_report))
    assert [s.identifiers for s in sections] == [[1]]
    scores = extract_scores_section(sections[0])
    assert (scores.pirads, scores.t2w, scores.dwi, scores.dce) == (5, 5, 5, "+")


def test_concatenated_reports(mark_report, finding_report):
    result = extract(_report(mark_report + "\n" + finding_report))
    assert result.status == "sectioned"
    assert result.n_sig == 2
    assert [f.pirads for f in result.findings] == [4, 5]


def test_grouped_header_counts_multiplicity():
    sections = split_sections(_report("afwijking 2+3: beide PI-RADS 4, T2W: 4, DWI: 4, DCE: +"))
    assert sections[0].identifiers == [2, 3]
    result = extract(_report("afwijking 2+3: beide PI-RADS 4, T2W: 4, DWI: 4, DCE: +"))
    assert result.findings[0].multiplicity == 2
    assert result.n_sig == 2


def test_joint_only_section():
    scores = extract_scores_section(LesionSection([1], "T2W/DWI/DCE score: 4/4/+"))
    assert (scores.pirads, scores.t2w, scores.dwi, scores.dce) == (None, 4, 4, "+")


def test_joint_values_take_precedence():
    scores = extract_scores_section(LesionSection([1], "T2W: 2. T2W/DWI/DCE score: 4/3/- PI-RADS 4"))
    assert (scores.t2w, scores.dwi, scores.dce) == (4, 3, "-")


def test_section_without_scores():
    with pytest.raises(NoScoresFound):
        extract_scores_section(LesionSection([1], "no abnormalities seen"))


@pytest.mark.parametrize("body", [
    "laesie 12 mm in de perifere zone, PI-RADS 4",
    "lesion 1.5 cm in the transition zone, PI-RADS 4",
])
def test_sizes_are_not_headers(body):
    assert split_sections(_report(body)) == []


def test_header_without_colon():
    body = "Afwijking 1 in de perifere zone. PI-RADS 4.\nAfwijking 2 in de transitiezone. PI-RADS 2."
    sections = split_sections(_report(body))
    assert [s.identifiers for s in sections] == [[1], [2]]
    assert sections[0].text == "in de perifere zone. PI-RADS 4."

    result = extract(_report(body))
    assert result.status == "sectioned"
    assert [f.pirads for f in result.findings] == [4, 2]
    assert result.n_sig == 1


def test_no_header_gives_no_sections():
    assert split_sections(_report("Normal prostate.")) == []


def test_strict_pairs_in_document_order():
    body = (
        "Left apex T2W/DWI/DCE score: 5/5/+ compatible with PI-RADS 5. "
        "Right base T2W/DWI/DCE score: 2/3/- so PI-RADS 3."
    )
    findings = extract_strict(_report(body))
    assert [(f.pirads, f.t2w, f.dwi, f.dce) for f in findings] == [(5, 5, 5, "+"), (3, 2, 3, "-")]
    result = extract(_report(body))
    assert result.status == "strict-fallback"
    assert result.n_sig == 1


def test_strict_missing_pirads_left_absent():
    findings = extract_strict(_report("T2W/DWI/DCE score: 4/4/+ and T2W/DWI/DCE score: 3/3/- PIRADS 4"))
    assert [f.pirads for f in findings] == [4, None]


def test_strict_ignores_pirads_only_prose():
    assert extract_strict(_report("Previously PI-RADS 4, now stable.")) == []
    assert extract_strict(_report("No joint scores here")) == []


def test_sectioned_dominates_strict(mark_report):
    body = mark_report + " Elsewhere T2W/DWI/DCE score: 5/5/+ PI-RADS 5."
    result = extract(_report(body))
    assert result.status == "sectioned"
    assert len(result.findings) == 1


def test_benign_report():
    result = extract(_report("Finding nr. 1: transition zone, PI-RADS 2."))
    assert result.n_sig == 0
    assert result.status == "sectioned"


def test_scoreless_report_is_empty():
    result = extract(_report("Prostate of normal size. No suspicious findings."))
    assert result.status == "empty"
    assert result.findings == []
    assert result.n_sig == 0


def test_diacritics_and_unicode_minus():
    result = extract(_report("Laesie nummer 1: T2W/DWI/DCE score: 4/4/− PI‐RADS: 4"))
    assert result.findings[0].dce == "-"
    assert extract(_report("Lésion 1: PI-RADS 4")).n_sig == 1


def test_language_profiles():
    body = "Afwijking 1: PI-RADS 5."
    assert ReportParser("dutch").extract(_report(body)).n_sig == 1
    assert ReportParser("english").extract(_report(body)).status == "empty"
    with pytest.raises(ReportFormatError):
        ReportParser("klingon")


@given(st.text(max_size=300))
def test_extract_never_raises(body):
    if not body.strip():
        return
    result = extract(_report(body))
    assert result.status in ("sectioned", "strict-fallback", "empty")
    assert result.n_sig >= 0


@given(st.sampled_from(["afwijking", "AFWIJKING", "Afwijking", "finding", "FINDING nr."]),
       st.sampled_from([" ", "   ", "\n", "\t "]))
def test_count_invariant_under_case_and_whitespace(keyword, gap):
    body = f"{keyword}{gap}1:{gap}PI-RADS{gap}4,{gap}T2W: 4.{gap}{keyword} 2: PI-RADS 5"
    assert extract(_report(body)).n_sig == 2


def test_evaluate_counts_example():
    matrix = evaluate_counts([0, 1, 2, 2], [0, 1, 1, 2])
    assert matrix.accuracy == pytest.approx(0.75)
    assert matrix.counts[1][2] == 1
    assert matrix.total == 4


def test_evaluate_counts_clips_to_five_plus():
    matrix = evaluate_counts([7, 5], [6, 9])
    assert matrix.counts[5][5] == 2
    assert matrix.accuracy == 1.0


def test_identity_counts_are_diagonal():
    counts = [0, 1, 2, 3, 4, 5]
    matrix = evaluate_counts(counts, counts)
    assert matrix.accuracy == 1.0
    assert all(matrix.counts[i][j] == 0 for i in range(6) for j in range(6) if i != j)


@pytest.mark.parametrize("predicted, truth", [([], []), ([1], [1, 2]), ([-1], [0])])
def test_evaluate_counts_rejects(predicted, truth):
    with pytest.raises(ReportFormatError):
        evaluate_counts(predicted, truth)


def test_confusion_table_rendering():
    table = confusion_table(evaluate_counts([0, 1, 2, 2], [0, 1, 1, 2]))
    lines = table.splitlines()
    assert lines[0].split()[-1] == "5+"
    assert lines[-1] == "accuracy 3/4 = 0.7500"
