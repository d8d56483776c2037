import numpy as np
import pytest

from app.core.errors import StatisticsError
from app.models.evaluation import FrocCurve, RunGroup
from app.services.statistics import (
    band,
    bootstrap,
    bootstrap_ci,
    permutation_record,
    permutation_test,
    significance_matrix,
)


def test_clear_separation_hits_minimum_p():
    better = RunGroup("better", (0.90, 0.91, 0.92, 0.93, 0.94))
    worse = RunGroup("worse", (0.70, 0.71, 0.72, 0.73, 0.74))
    result = permutation_record(better, worse, iterations=2000, seed=1)
    assert result.p == pytest.approx(1 / 2001)
    assert result.significant
    assert result.groups == ("better", "worse")
    assert result.statistic == pytest.approx(0.2)


def test_reversed_groups_are_not_significant():
    p = permutation_test([0.70, 0.71, 0.72], [0.90, 0.91, 0.92], iterations=1000)
    assert p > 0.9


def test_identical_distributions():
    p = permutation_test([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0], iterations=2000, seed=5)
    assert 0.2 < p < 0.6


def test_permutation_independent_of_jobs():
    a, b = [0.80, 0.82, 0.79, 0.85], [0.78, 0.81, 0.77, 0.80]
    serial = permutation_test(a, b, iterations=3500, seed=11, jobs=1)
    parallel = permutation_test(a, b, iterations=3500, seed=11, jobs=4)
    assert serial == parallel
    assert permutation_test(a, b, iterations=3500, seed=11) == serial


@pytest.mark.parametrize("a, b, iterations", [([0.5], [0.4, 0.3], 100), ([0.5, 0.6], [0.4, 0.3], 0)])
def test_permutation_errors(a, b, iterations):
    with pytest.raises(StatisticsError):
        permutation_record(a, b, iterations=iterations)


def test_empty_run_group():
    with pytest.raises(StatisticsError):
        RunGroup("empty", ())


def test_significance_matrix_shape():
    groups = [RunGroup("a", (0.9, 0.91, 0.92)), RunGroup("b", (0.5, 0.51, 0.52)), RunGroup("c", (0.7, 0.71, 0.72))]
    matrix = significance_matrix(groups, iterations=500)
    p = matrix.p
    assert [row[i] for i, row in enumerate(p)] == [None, None, None]
    assert p[0][1] < 0.05
    assert p[1][0] > 0.9

    payload = matrix.to_dict()
    assert payload["groups"] == ["a", "b", "c"]
    assert len(payload["pairs"]) == 6
    assert payload["iterations"] == 500
    assert {tuple(pair.groups) for pair in matrix.pairs if pair.significant} == {("a", "b"), ("a", "c"), ("c", "b")}


def test_significance_matrix_needs_two_groups():
    with pytest.raises(StatisticsError):
        significance_matrix([RunGroup("only", (0.8, 0.9))], iterations=100)


@pytest.mark.slow
def test_permutation_test_is_calibrated_under_the_null():
    rng = np.random.default_rng(2024)
    trials = 1000
    rejected = 0
    for seed in range(trials):
        a, b = rng.normal(0.8, 0.05, size=(2, 5))
        rejected += permutation_test(a.tolist(), b.tolist(), iterations=999, seed=seed) < 0.05
    assert 0.03 <= rejected / trials <= 0.07


def test_bootstrap_constant_metric_has_zero_width():
    values = [0.5] * 12
    labels = [0, 1] * 6
    result = bootstrap(values, labels, metric="mean", iterations=300, seed=2)
    assert result.lo == result.hi == pytest.approx(0.5)
    assert result.estimate == pytest.approx(0.5)


def test_bootstrap_perfect_separation():
    values = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9]
    labels = [0, 0, 0, 1, 1, 1]
    result = bootstrap(values, labels, iterations=500, seed=3)
    assert result.interval == (1.0, 1.0)
    # single-case draws always hold one class only
    assert result.rejected > 0


def test_bootstrap_interval_contains_estimate():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1], 30)
    values = rng.normal(labels * 0.8, 1.0)
    result = bootstrap(values, labels, iterations=1000, seed=4)
    assert result.lo <= result.estimate <= result.hi
    assert result.hi - result.lo > 0


def test_bootstrap_independent_of_jobs():
    labels = [0, 1, 0, 1, 1, 0, 1, 0]
    values = [0.2, 0.7, 0.4, 0.5, 0.9, 0.3, 0.6, 0.45]
    serial = bootstrap(values, labels, iterations=2500, seed=9, jobs=1)
    parallel = bootstrap(values, labels, iterations=2500, seed=9, jobs=3)
    assert serial.interval == parallel.interval
    assert serial.rejected == parallel.rejected
    assert bootstrap_ci(values, labels, iterations=2500, seed=9) == serial.interval


def test_bootstrap_custom_metric():
    result = bootstrap([1.0, 2.0, 3.0, 4.0], [0, 1, 0, 1], metric=lambda v, y: float(v.max()), iterations=200)
    assert 1.0 <= result.lo <= result.hi <= 4.0


@pytest.mark.parametrize("kwargs", [
    {"iterations": 99},
    {"labels": [1, 1, 1, 1]},
    {"labels": [0, 1, 0]},
    {"metric": "median"},
])
def test_bootstrap_errors(kwargs):
    arguments = {"per_case_values": [0.1, 0.2, 0.3, 0.4], "labels": [0, 1, 0, 1], "iterations": 200, **kwargs}
    with pytest.raises(StatisticsError):
        bootstrap(**arguments)


def test_band_of_step_curves():
    curves = [FrocCurve([(0.0, 0.2), (1.0, 0.4)]), FrocCurve([(0.0, 0.6), (1.0, 0.8)])]
    lo, median, hi = band(curves, [0.0, 0.5, 1.0])
    assert median.tolist() == pytest.approx([0.4, 0.4, 0.6])
    assert lo.tolist() == pytest.approx([0.21, 0.21, 0.41])
    assert hi.tolist() == pytest.approx([0.59, 0.59, 0.79])


def test_band_errors():
    curve = FrocCurve([(0.0, 0.5)])
    with pytest.raises(StatisticsError):
        band([curve], [0.0])
    with pytest.raises(StatisticsError):
        band([curve, curve], [])
