import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.core.errors import GridMismatchError, MetricError, UnreachableOperatingPoint
from app.models.evaluation import FrocCurve
from app.models.lesion import AnnotationOutcome, LesionCandidate
from app.models.volume import LabelVolume
from app.services.annotation import mask_candidates
from app.services.metrics import (
    auroc,
    case_score,
    dice,
    dsc_report,
    froc,
    localisation_summary,
    match_candidates,
    operating_point,
    pauc,
    roc,
    step_value,
)
from oracles import pairwise_auc

DIMS = (10, 10, 1)
SPACING = (1.0, 1.0, 1.0)


def _gt(lesions) -> LabelVolume:
    flat = np.zeros(100, dtype=np.int32)
    for label, voxels in enumerate(lesions, start=1):
        flat[list(voxels)] = label
    return LabelVolume(flat.reshape(1, 10, 10), SPACING)


def _cand(voxels, peak) -> LesionCandidate:
    voxels = sorted(voxels)
    return LesionCandidate(np.array(voxels), voxels[0], peak, len(voxels) * 0.001, peak, DIMS)


def test_match_greedy_in_rank_order():
    gt = _gt([range(0, 10), range(20, 30)])
    candidates = [_cand(range(0, 10), 0.9), _cand(range(0, 5), 0.8), _cand(range(20, 25), 0.7)]
    result = match_candidates(candidates, gt)
    assert [(rank, label) for rank, label, _ in result.pairs] == [(0, 1), (2, 2)]
    assert result.unmatched_candidates == [1]
    assert result.unmatched_gt == []
    assert result.pairs[1][2] == pytest.approx(0.5)


def test_match_threshold_and_criterion():
    gt = _gt([range(0, 20)])
    weak = [_cand(range(0, 1), 0.9)]
    # IoU 1/20 < 0.10, Dice 2/21 < 0.10, both miss
    assert match_candidates(weak, gt).n_hits == 0
    assert match_candidates(weak, gt, criterion="dice").n_hits == 0
    # IoU 2/20 = 0.10 hits
    assert match_candidates([_cand(range(0, 2), 0.9)], gt).n_hits == 1


def test_match_ties_go_to_lower_label():
    gt = _gt([[0, 1], [2, 3]])
    result = match_candidates([_cand([1, 2], 0.9)], gt, hit_threshold=0.3)
    assert result.pairs[0][1] == 1


def test_match_grid_mismatch():
    wrong = LesionCandidate(np.array([0]), 0, 0.5, 0.001, 0.5, (5, 5, 1))
    with pytest.raises(GridMismatchError):
        match_candidates([wrong], _gt([[0]]))


def test_froc_small_example():
    gt = _gt([range(0, 10), range(50, 60)])
    candidates = [_cand(range(0, 10), 0.9), _cand(range(80, 85), 0.6), _cand(range(50, 60), 0.3)]
    curve = froc([(candidates, gt)])
    assert curve.thresholds == [0.9, 0.6, 0.3]
    assert curve.points == [(0.0, 0.5), (1.0, 0.5), (1.0, 1.0)]


def test_froc_without_lesions_is_undefined():
    with pytest.raises(MetricError):
        froc([([_cand([0], 0.5)], _gt([]))])
    with pytest.raises(MetricError):
        froc([])


def _random_case(rng):
    n_lesions = int(rng.integers(0, 3))
    starts = rng.choice(np.arange(0, 90, 10), size=n_lesions + 3, replace=False)
    lesions = [range(s, s + 6) for s in starts[:n_lesions]]
    candidates = []
    for start in starts:
        offset = int(rng.integers(0, 4))
        candidates.append(_cand(range(start + offset, start + offset + 4), float(rng.choice([0.2, 0.4, 0.6, 0.8, 0.9]))))
    candidates.sort(key=lambda c: -c.peak_confidence)
    return candidates, _gt(lesions)


def _recount(cases, t):
    hits = fps = lesions = 0
    for candidates, gt in cases:
        selected = [c for c in candidates if c.peak_confidence >= t]
        result = match_candidates(selected, gt)
        hits += result.n_hits
        fps += len(result.unmatched_candidates)
        lesions += gt.num_labels
    return fps / len(cases), hits / lesions


@settings(max_examples=25)
@given(seed=st.integers(0, 100_000))
def test_froc_matches_per_threshold_recount(seed):
    rng = np.random.default_rng(seed)
    cases = [_random_case(rng) for _ in range(5)]
    if sum(gt.num_labels for _, gt in cases) == 0:
        return
    curve = froc(cases)
    for t, (fp, sensitivity) in zip(curve.thresholds, curve.points):
        expected_fp, expected_sens = _recount(cases, t)
        assert fp == pytest.approx(expected_fp, abs=1e-9)
        assert sensitivity == pytest.approx(expected_sens, abs=1e-9)


def test_report_masking_never_adds_false_positives():
    rng = np.random.default_rng(3)
    for _ in range(25):
        candidates, gt = _random_case(rng)
        n_sig = int(rng.integers(0, len(candidates) + 1))
        masked = mask_candidates(candidates, n_sig)
        for t in {c.peak_confidence for c in candidates}:
            full = match_candidates([c for c in candidates if c.peak_confidence >= t], gt)
            top = match_candidates([c for c in masked if c.peak_confidence >= t], gt)
            assert len(top.unmatched_candidates) <= len(full.unmatched_candidates)
            assert {label for rank, label, _ in top.pairs} <= {label for rank, label, _ in full.pairs}


def _pauc_oracle(points, lo, hi):
    area = 0.0
    xs = [x for x, _ in points] + [hi]
    for i, (x, y) in enumerate(points):
        left, right = max(x, lo), min(xs[i + 1], hi)
        if right > left:
            area += (right - left) * y
    return area


@settings(max_examples=25)
@given(
    steps=st.lists(st.tuples(st.floats(0, 0.5), st.floats(0, 0.3)), min_size=1, max_size=8),
    lo=st.floats(0, 0.5),
    width=st.floats(0.05, 2.0),
)
def test_pauc_matches_step_integral(steps, lo, width):
    x = y = 0.0
    points = []
    for dx, dy in steps:
        x, y = x + dx, min(1.0, y + dy)
        points.append((x, y))
    curve = FrocCurve(points)
    hi = lo + width
    value = pauc(curve, lo, hi)
    assert value == pytest.approx(_pauc_oracle(points, lo, hi), abs=1e-9)
    assert 0.0 <= value <= hi - lo + 1e-12


def test_pauc_errors():
    with pytest.raises(MetricError):
        pauc(FrocCurve([(0.0, 0.5)]), 1.0, 1.0)
    with pytest.raises(MetricError):
        pauc(FrocCurve([]))


def test_step_value_is_right_continuous():
    curve = FrocCurve([(0.2, 0.3), (0.2, 0.5), (1.0, 0.9)])
    assert step_value(curve, 0.1) == 0.0
    assert step_value(curve, 0.2) == 0.5
    assert step_value(curve, 0.99) == 0.5
    assert step_value(curve, 5.0) == 0.9


def test_auroc_perfect_and_ties():
    assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auroc([0.5, 0.5], [1, 0]) == 0.5


@settings(max_examples=25)
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), st.integers(0, 1)), min_size=2, max_size=30))
def test_auroc_equals_pairwise_u(pairs):
    scores = [s for s, _ in pairs]
    labels = [y for _, y in pairs]
    if len(set(labels)) < 2:
        with pytest.raises(MetricError):
            auroc(scores, labels)
        return
    value = auroc(scores, labels)
    assert value == pytest.approx(pairwise_auc(scores, labels), abs=1e-9)
    assert auroc([np.exp(3 * s) for s in scores], labels) == pytest.approx(value, abs=1e-9)


def test_auroc_errors():
    with pytest.raises(MetricError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(MetricError):
        auroc([0.1], [1, 0])


def test_roc_curve_and_specificity():
    curve = roc([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0])
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)
    assert operating_point(curve, "spec_at_sens", 1.0) == pytest.approx(0.5)
    assert operating_point(curve, "spec_at_sens", 0.5) == pytest.approx(1.0)


def test_operating_point_errors():
    froc_curve = FrocCurve([(0.5, 0.8)])
    assert operating_point(froc_curve, "sens_at_fp", 1.0) == 0.8
    assert operating_point(froc_curve, "sens_at_fp", 0.1) == 0.0
    with pytest.raises(UnreachableOperatingPoint):
        operating_point(froc_curve, "sens_at_fp", -1.0)
    with pytest.raises(UnreachableOperatingPoint):
        operating_point(froc_curve, "spec_at_sens", 0.5)
    with pytest.raises(UnreachableOperatingPoint):
        operating_point(roc([0.1, 0.2], [1, 0]), "spec_at_sens", 1.5)


def test_case_score():
    assert case_score([]) == 0.0
    assert case_score([_cand([0], 0.4), _cand([1], 0.7)]) == 0.7


def test_dice_basics():
    a = np.zeros((1, 2, 2), dtype=bool)
    assert dice(a, a) == 1.0
    b = a.copy()
    b[0, 0, 0] = True
    assert dice(a, b) == 0.0
    assert dice(b, b) == 1.0
    with pytest.raises(GridMismatchError):
        dice(a, np.zeros((1, 2, 3)))


@settings(max_examples=50)
@given(arrays(np.bool_, (2, 3, 4)), arrays(np.bool_, (2, 3, 4)))
def test_dice_symmetric_and_bounded(a, b):
    value = dice(a, b)
    assert value == dice(b, a)
    assert 0.0 <= value <= 1.0
    total = a.sum() + b.sum()
    if total:
        assert value == pytest.approx(2 * np.logical_and(a, b).sum() / total)


def _outcome(case_id, kept, status="annotated"):
    return AnnotationOutcome(case_id=case_id, status=status, n_sig=len(kept), kept=kept)


def test_dsc_report_hand_aggregated():
    gt_a = _gt([range(0, 10), range(50, 54)])
    gt_b = _gt([range(20, 30)])
    outcomes = [
        _outcome("a", [_cand(range(0, 10), 0.9)]),
        _outcome("b", [_cand(range(20, 25), 0.8)]),
    ]
    summary = dsc_report(outcomes, [gt_a, gt_b])
    assert [d.dsc for d in summary.per_lesion] == pytest.approx([1.0, 2 * 5 / 15])
    assert summary.mean == pytest.approx((1.0 + 2 / 3) / 2)

    with_missed = dsc_report(outcomes, [gt_a, gt_b], include_missed=True)
    assert [(d.case_id, d.gt_label, d.matched) for d in with_missed.per_lesion] == [
        ("a", 1, True), ("a", 2, False), ("b", 1, True),
    ]
    assert with_missed.mean == pytest.approx((1.0 + 0.0 + 2 / 3) / 3)
    assert with_missed.volume_dsc_pairs[1] == (pytest.approx(0.004), 0.0)


def test_dsc_report_skips_excluded():
    gt = _gt([range(0, 10)])
    summary = dsc_report([_outcome("x", [], status="excluded")], [gt], include_missed=True)
    assert summary.mean is None
    assert summary.per_lesion == []


def test_localisation_summary():
    gt = _gt([range(0, 10), range(50, 60)])
    summary = localisation_summary([[_cand(range(0, 10), 0.9), _cand(range(80, 85), 0.5)]], [gt], n_excluded=2)
    assert summary.sensitivity == 0.5
    assert summary.fp_per_case == 1.0
    assert summary.n_excluded == 2
