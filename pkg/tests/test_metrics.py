import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsad.errors import DataError
from hsad.manifest import UtteranceRecord
from hsad.metrics import (EvalReport, accuracy, confusion_matrix, eer, evaluate, prf_from_confusion,
                          reliability_stats, render_accuracy_table, render_reliability_table, threshold_classify)

import metric_fixtures as fx


@pytest.mark.parametrize("tag,rel,expected", [(0, 0.0, 0), (0, 0.49, 0), (0, 0.5, 1), (0, 0.9, 1),
                                              (1, 0.51, 0), (1, 0.5, 1), (1, 1.0, 0), (1, 0.1, 1)])
def test_threshold_examples(tag, rel, expected):
    assert threshold_classify(tag, rel) == expected


def test_threshold_grid_matches_formula():
    for tag in (0, 1):
        for i in range(1001):
            r = i / 1000
            assert threshold_classify(tag, r) == (0 if abs(tag - r) < 0.5 else 1)


def test_threshold_rejects_bad_input():
    with pytest.raises(ValueError):
        threshold_classify(2, 0.5)
    with pytest.raises(ValueError):
        threshold_classify(0, 1.5)


@pytest.mark.parametrize("correct,expected", [(63663, 89.37), (63863, 89.65), (42143, 59.16)])
def test_accuracy_table_values(correct, expected):
    assert accuracy(correct, 71237) == expected


def test_accuracy_rounds_half_up():
    assert accuracy(1, 8) == 12.5
    assert accuracy(1, 16) == 6.25
    assert accuracy(1, 32) == 3.13  # 3.125 exactly; binary rounding would give 3.12
    with pytest.raises(ValueError):
        accuracy(1, 0)


def test_prf_diagonal():
    rates = prf_from_confusion(np.diag([3, 4, 5, 6]))
    for key, want in (("precision", 1), ("recall", 1), ("f1", 1), ("fpr", 0), ("fnr", 0)):
        assert rates[key] == [want] * 4


def test_prf_binary_hand_case():
    rates = prf_from_confusion([[9, 1], [1, 89]])
    assert rates["precision"][0] == pytest.approx(0.9)
    assert rates["recall"][0] == pytest.approx(0.9)
    assert rates["f1"][0] == pytest.approx(0.9)


def test_prf_empty_class():
    rates = prf_from_confusion([[5, 0], [0, 0]])
    assert rates["precision"][1] == 0 and rates["recall"][1] == 0 and rates["f1"][1] == 0


def test_prf_ten_example_fixture():
    cm = confusion_matrix(fx.TRUTH, fx.PRED)
    assert cm.tolist() == fx.CONFUSION
    rates = prf_from_confusion(cm)
    for key, want in (("precision", fx.PRECISION), ("recall", fx.RECALL), ("f1", fx.F1),
                      ("fpr", fx.FPR), ("fnr", fx.FNR)):
        assert rates[key] == pytest.approx(want, abs=1e-12), key


def test_eer_simple_cases():
    assert eer([0.1, 0.2], [0.8, 0.9]) == 0.0
    assert eer([0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.5)
    assert eer([0.1, 0.6], [0.4, 0.9]) == pytest.approx(fx.brute_force_eer([0.1, 0.6], [0.4, 0.9]), abs=1e-6)
    with pytest.raises(ValueError):
        eer([], [0.3])


def test_eer_ten_example_fixture():
    g = [s for t, s in zip(fx.TRUTH, fx.SCORES) if t == 0]
    s = [s for t, s in zip(fx.TRUTH, fx.SCORES) if t != 0]
    assert eer(g, s) == pytest.approx(fx.EER, abs=1e-12)
    assert abs(eer(g, s) - fx.brute_force_eer(g, s)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=6), st.lists(st.integers(0, 20), min_size=1, max_size=6))
def test_eer_matches_sweep_and_is_monotone_invariant(g, s):
    g, s = [x / 20 for x in g], [x / 20 for x in s]
    e = eer(g, s)
    assert 0.0 <= e <= 1.0
    assert abs(e - fx.brute_force_eer(g, s, points=4001)) < 1e-6
    assert eer([x ** 3 + 2 for x in g], [x ** 3 + 2 for x in s]) == pytest.approx(e, abs=1e-12)


def test_reliability_hand_values():
    st_ = reliability_stats([0.2, 0.4, 0.6])
    assert st_.mean == pytest.approx(0.4) and st_.std_dev == pytest.approx(0.1633, abs=5e-5)
    assert st_.max == 0.6 and st_.min == 0.2 and st_.count == 3
    assert reliability_stats([0.5] * 4).mode == pytest.approx(0.505)
    assert reliability_stats([1.0, 1.0, 0.2]).mode == pytest.approx(0.995)
    assert reliability_stats([0.31, 0.32, 0.33], bin_width=0.1).mode == pytest.approx(0.35)
    with pytest.raises(ValueError):
        reliability_stats([])
    with pytest.raises(ValueError):
        reliability_stats([1.2])


def test_evaluate_ten_example_fixture():
    report = evaluate(fx.fixture_predictions())
    assert report.accuracy_pct == fx.ACCURACY and report.total == 10
    assert report.confusion == fx.CONFUSION
    assert report.f1 == pytest.approx(fx.F1)
    assert report.eer == pytest.approx(fx.EER, abs=1e-12)
    assert report.threshold_accuracy_pct == fx.THRESHOLD_ACCURACY
    assert list(report.group_stats) == ["G1", "G2", "G3", "G4"]
    for g, want in fx.GROUP_STATS.items():
        s = report.group_stats[g]
        assert (s.mean, s.std_dev, s.max, s.min, s.mode) == pytest.approx(want, abs=1e-12), g


def test_evaluate_all_correct_and_shifted():
    preds = fx.fixture_predictions()
    right = [(r, t, p) for (r, _, p), t in zip(preds, fx.TRUTH)]
    assert evaluate(right).accuracy_pct == 100.00
    shifted = [(r, (t + 1) % 4, p) for (r, _, p), t in zip(preds, fx.TRUTH)]
    assert evaluate(shifted).accuracy_pct == 0.00


def test_evaluate_rejects_out_of_range():
    rec = UtteranceRecord(utterance_id="x", group="G1")
    with pytest.raises(DataError):
        evaluate([(rec, 7, np.array([0.25] * 4))])


def test_report_roundtrips():
    report = evaluate(fx.fixture_predictions())
    assert EvalReport.from_dict(report.to_dict()) == report
    assert EvalReport.from_lines(report.to_lines()) == report
    text = report.render()
    assert "accuracy_pct: 70.00" in text and "Std Dev" in text


def test_tables():
    table = render_accuracy_table([("AST", 63663, 71237)])
    assert "63,663 / 71,237" in table and "89.37%" in table
    assert render_reliability_table({}).split() == ["Group", "Mean", "Std", "Dev", "Max", "Min", "Mode"]
